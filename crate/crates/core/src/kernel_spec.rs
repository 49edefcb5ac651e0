use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{
    compress, CcfDescriptor, Dim, Role, StoredMatrix, DEFAULT_INDEX_BYTES, DEFAULT_VALUE_BYTES,
};

/// Concrete operands attached to a spec, both held as row-major dense grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Operands {
    pub a: StoredMatrix,
    pub b: StoredMatrix,
}

/// One matmul task `O[M,N] = A[M,K] · B[K,N]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub id: String,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub d_a: f64,
    pub d_b: f64,
    /// Format A is delivered in.
    pub ccf_a: CcfDescriptor,
    /// Format B is delivered in.
    pub ccf_b: CcfDescriptor,
    #[serde(default = "default_value_bytes")]
    pub value_bytes: u64,
    #[serde(default = "default_index_bytes")]
    pub index_bytes: u64,
    #[serde(skip)]
    pub operands: Option<Arc<Operands>>,
}

fn default_value_bytes() -> u64 {
    DEFAULT_VALUE_BYTES
}

fn default_index_bytes() -> u64 {
    DEFAULT_INDEX_BYTES
}

impl PartialEq for KernelSpec {
    fn eq(&self, o: &Self) -> bool {
        self.id == o.id
            && (self.m, self.k, self.n) == (o.m, o.k, o.n)
            && self.d_a == o.d_a
            && self.d_b == o.d_b
            && (self.ccf_a, self.ccf_b) == (o.ccf_a, o.ccf_b)
            && (self.value_bytes, self.index_bytes) == (o.value_bytes, o.index_bytes)
            && self.operands == o.operands
    }
}

/// Host-delivered format for an operand of the given density: compressed
/// along K when sparse, row-major dense when full.
pub fn delivered_ccf(role: Role, density: f64) -> CcfDescriptor {
    match (role, density < 1.0) {
        (Role::A, true) => CcfDescriptor::compressed(Dim::M, Dim::K),
        (Role::B, true) => CcfDescriptor::compressed(Dim::N, Dim::K),
        (r, _) => CcfDescriptor::row_major(r),
    }
}

impl KernelSpec {
    /// Spec with delivered formats chosen from the densities.
    pub fn new(id: impl Into<String>, m: usize, k: usize, n: usize, d_a: f64, d_b: f64) -> Self {
        Self {
            id: id.into(),
            m,
            k,
            n,
            d_a,
            d_b,
            ccf_a: delivered_ccf(Role::A, d_a),
            ccf_b: delivered_ccf(Role::B, d_b),
            value_bytes: DEFAULT_VALUE_BYTES,
            index_bytes: DEFAULT_INDEX_BYTES,
            operands: None,
        }
    }

    pub fn with_ccfs(mut self, a: CcfDescriptor, b: CcfDescriptor) -> Self {
        self.ccf_a = a;
        self.ccf_b = b;
        self
    }

    /// Attaches concrete operands; densities become the measured ones.
    pub fn with_operands(mut self, a: StoredMatrix, b: StoredMatrix) -> Result<Self> {
        if a.role() != Role::A || b.role() != Role::B {
            return Err(Error::Workload("operands must have roles A and B".into()));
        }
        if (a.rows(), a.cols(), b.rows(), b.cols()) != (self.m, self.k, self.k, self.n) {
            return Err(Error::Shape(format!(
                "operands {}x{} and {}x{} do not match spec {}x{}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                self.m,
                self.k,
                self.n
            )));
        }
        let dense = |x: &StoredMatrix| -> Result<StoredMatrix> {
            if x.is_dense() && x.ccf() == CcfDescriptor::row_major(x.role()) {
                Ok(x.clone())
            } else {
                let g = crate::formats::decompress(x)?;
                compress(&g, CcfDescriptor::row_major(x.role()))
            }
        };
        let (a, b) = (dense(&a)?, dense(&b)?);
        self.d_a = a.density();
        self.d_b = b.density();
        self.operands = Some(Arc::new(Operands { a, b }));
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::Workload(format!(
                "`{}`: extents must be >= 1, got {}x{}x{}",
                self.id, self.m, self.k, self.n
            )));
        }
        for d in [self.d_a, self.d_b] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Density(d));
            }
        }
        if self.value_bytes == 0 || self.index_bytes == 0 {
            return Err(Error::Workload(format!("`{}`: byte widths must be positive", self.id)));
        }
        self.ccf_a.check_role(Role::A)?;
        self.ccf_b.check_role(Role::B)?;
        Ok(())
    }

    /// `M·K·N` as a float.
    pub fn volume(&self) -> f64 {
        self.m as f64 * self.k as f64 * self.n as f64
    }

    /// Expected nonzero products `M·K·N·d_A·d_B`.
    pub fn effectual_macs(&self) -> f64 {
        self.volume() * self.d_a * self.d_b
    }

    /// A sub-problem over the given extents and densities, same widths and
    /// delivered formats, without operands.
    pub fn sub(&self, m: usize, k: usize, n: usize, d_a: f64, d_b: f64) -> KernelSpec {
        KernelSpec {
            id: self.id.clone(),
            m,
            k,
            n,
            d_a,
            d_b,
            ccf_a: self.ccf_a,
            ccf_b: self.ccf_b,
            value_bytes: self.value_bytes,
            index_bytes: self.index_bytes,
            operands: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::gen_uniform_random;

    #[test]
    fn delivered_formats() {
        let s = KernelSpec::new("x", 4, 4, 4, 0.5, 1.0);
        assert_eq!(s.ccf_a.to_string(), "UMCK");
        assert_eq!(s.ccf_b.to_string(), "UKUN");
        let s = KernelSpec::new("x", 4, 4, 4, 1.0, 0.3);
        assert_eq!(s.ccf_a.to_string(), "UMUK");
        assert_eq!(s.ccf_b.to_string(), "UNCK");
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::new("x", 1, 1, 1, 1.0, 1.0).validate().is_ok());
        assert!(KernelSpec::new("x", 0, 1, 1, 1.0, 1.0).validate().is_err());
        assert!(KernelSpec::new("x", 1, 1, 1, 0.0, 1.0).validate().is_err());
        assert!(KernelSpec::new("x", 1, 1, 1, 1.0, 1.5).validate().is_err());
        let bad = KernelSpec::new("x", 1, 1, 1, 1.0, 1.0)
            .with_ccfs(CcfDescriptor::dense(Dim::K, Dim::N), CcfDescriptor::dense(Dim::K, Dim::N));
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip_skips_operands() {
        let a = gen_uniform_random(Role::A, 3, 4, 0.5, 1).unwrap();
        let b = gen_uniform_random(Role::B, 4, 2, 0.5, 2).unwrap();
        let s = KernelSpec::new("w", 3, 4, 2, 0.5, 0.5).with_operands(a, b).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: KernelSpec = serde_json::from_str(&j).unwrap();
        assert!(back.operands.is_none());
        assert_eq!(back.d_a, s.d_a);
        assert_eq!(back.ccf_a, s.ccf_a);
    }

    #[test]
    fn measured_density() {
        let a = StoredMatrix::dense(Role::A, 2, 2, vec![1., 0., 0., 0.]).unwrap();
        let b = StoredMatrix::dense(Role::B, 2, 2, vec![1., 2., 3., 0.]).unwrap();
        let s = KernelSpec::new("w", 2, 2, 2, 1.0, 1.0).with_operands(a, b).unwrap();
        assert_eq!(s.d_a, 0.25);
        assert_eq!(s.d_b, 0.75);
    }
}
