use serde::{Deserialize, Serialize};

use super::ccf::{CcfDescriptor, Dim, Role};
use crate::error::{Error, Result};

/// Storage of a [`StoredMatrix`], laid out in the descriptor's outer-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Payload {
    Dense {
        values: Vec<f64>,
    },
    Compressed {
        pos: Vec<usize>,
        crd: Vec<usize>,
        values: Vec<f64>,
    },
}

/// One operand in dense or compressed (pos/crd/values) form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    role: Role,
    rows: usize,
    cols: usize,
    ccf: CcfDescriptor,
    payload: Payload,
}

impl StoredMatrix {
    /// Row-major dense matrix.
    pub fn dense(role: Role, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidPayload(format!(
                "{} values for a {rows}x{cols} dense matrix",
                values.len()
            )));
        }
        Ok(Self {
            role,
            rows,
            cols,
            ccf: CcfDescriptor::row_major(role),
            payload: Payload::Dense { values },
        })
    }

    pub fn zeros(role: Role, rows: usize, cols: usize) -> Self {
        Self::dense(role, rows, cols, vec![0.0; rows * cols]).expect("sized")
    }

    /// Builds a matrix from raw parts and checks every storage invariant.
    pub fn from_parts(
        role: Role,
        rows: usize,
        cols: usize,
        ccf: CcfDescriptor,
        payload: Payload,
    ) -> Result<Self> {
        let m = Self::from_parts_unchecked(role, rows, cols, ccf, payload);
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix without validation. Used for ingesting untrusted
    /// fixtures; [`decompress`] rejects invalid payloads.
    pub fn from_parts_unchecked(
        role: Role,
        rows: usize,
        cols: usize,
        ccf: CcfDescriptor,
        payload: Payload,
    ) -> Self {
        Self {
            role,
            rows,
            cols,
            ccf,
            payload,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ccf(&self) -> CcfDescriptor {
        self.ccf
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.payload, Payload::Dense { .. })
    }

    /// Extent of a named dimension of this matrix.
    pub fn extent(&self, dim: Dim) -> usize {
        let (r, _) = self.role.dims();
        if dim == r {
            self.rows
        } else {
            self.cols
        }
    }

    pub fn outer_extent(&self) -> usize {
        self.extent(self.ccf.outer_dim)
    }

    pub fn inner_extent(&self) -> usize {
        self.extent(self.ccf.inner_dim)
    }

    fn outer_is_rows(&self) -> bool {
        self.ccf.outer_dim == self.role.dims().0
    }

    /// Number of stored entries (all cells for dense payloads).
    pub fn stored_len(&self) -> usize {
        match &self.payload {
            Payload::Dense { values } => values.len(),
            Payload::Compressed { values, .. } => values.len(),
        }
    }

    /// Count of nonzero values.
    pub fn nnz(&self) -> usize {
        match &self.payload {
            Payload::Dense { values } | Payload::Compressed { values, .. } => {
                values.iter().filter(|v| **v != 0.0).count()
            }
        }
    }

    pub fn density(&self) -> f64 {
        let cells = self.rows * self.cols;
        if cells == 0 {
            0.0
        } else {
            self.nnz() as f64 / cells as f64
        }
    }

    /// Coordinates and values of one outer slice of a compressed matrix.
    pub fn slice(&self, outer: usize) -> (&[usize], &[f64]) {
        match &self.payload {
            Payload::Compressed { pos, crd, values } => {
                let (lo, hi) = (pos[outer], pos[outer + 1]);
                (&crd[lo..hi], &values[lo..hi])
            }
            Payload::Dense { .. } => panic!("slice() on a dense matrix"),
        }
    }

    /// Number of entries stored in one outer slice.
    pub fn slice_len(&self, outer: usize) -> usize {
        match &self.payload {
            Payload::Compressed { pos, .. } => pos[outer + 1] - pos[outer],
            Payload::Dense { .. } => self.inner_extent(),
        }
    }

    /// Dense values in storage order; panics on compressed payloads.
    pub fn dense_values(&self) -> &[f64] {
        match &self.payload {
            Payload::Dense { values } => values,
            Payload::Compressed { .. } => panic!("dense_values() on a compressed matrix"),
        }
    }

    /// Value at logical (row, col).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (outer, inner) = if self.outer_is_rows() {
            (row, col)
        } else {
            (col, row)
        };
        match &self.payload {
            Payload::Dense { values } => values[outer * self.inner_extent() + inner],
            Payload::Compressed { .. } => {
                let (crd, vals) = self.slice(outer);
                crd.binary_search(&inner).map_or(0.0, |p| vals[p])
            }
        }
    }

    /// Checks the pos/crd/values invariants.
    pub fn validate(&self) -> Result<()> {
        self.ccf.check_role(self.role)?;
        let outer = self.outer_extent();
        let inner = self.inner_extent();
        match &self.payload {
            Payload::Dense { values } => {
                if self.ccf.is_compressed() {
                    return Err(Error::InvalidPayload(format!(
                        "dense payload tagged {}",
                        self.ccf
                    )));
                }
                if values.len() != outer * inner {
                    return Err(Error::InvalidPayload(format!(
                        "dense payload has {} values, expected {}",
                        values.len(),
                        outer * inner
                    )));
                }
            }
            Payload::Compressed { pos, crd, values } => {
                if !self.ccf.is_compressed() {
                    return Err(Error::InvalidPayload(format!(
                        "compressed payload tagged {}",
                        self.ccf
                    )));
                }
                if pos.len() != outer + 1 {
                    return Err(Error::InvalidPayload(format!(
                        "pos has length {}, expected {}",
                        pos.len(),
                        outer + 1
                    )));
                }
                if pos[0] != 0 {
                    return Err(Error::InvalidPayload(format!("pos[0] = {}", pos[0])));
                }
                if crd.len() != values.len() {
                    return Err(Error::InvalidPayload(format!(
                        "crd has {} entries but values has {}",
                        crd.len(),
                        values.len()
                    )));
                }
                if pos[outer] != crd.len() {
                    return Err(Error::InvalidPayload(format!(
                        "pos[last] = {} but nnz = {}",
                        pos[outer],
                        crd.len()
                    )));
                }
                for o in 0..outer {
                    if pos[o] > pos[o + 1] {
                        return Err(Error::InvalidPayload(format!(
                            "pos decreases at outer index {o}"
                        )));
                    }
                    let seg = &crd[pos[o]..pos[o + 1]];
                    for (i, &c) in seg.iter().enumerate() {
                        if c >= inner {
                            return Err(Error::InvalidPayload(format!(
                                "crd {c} out of range {inner} in outer slice {o}"
                            )));
                        }
                        if i > 0 && seg[i - 1] >= c {
                            return Err(Error::InvalidPayload(format!(
                                "crd not strictly increasing in outer slice {o}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Removes explicitly stored zeros from a compressed payload.
    pub fn normalize(self) -> Self {
        match self.payload {
            Payload::Dense { .. } => self,
            Payload::Compressed { pos, crd, values } => {
                let outer = pos.len() - 1;
                let mut npos = Vec::with_capacity(pos.len());
                let mut ncrd = Vec::with_capacity(crd.len());
                let mut nval = Vec::with_capacity(values.len());
                npos.push(0);
                for o in 0..outer {
                    for p in pos[o]..pos[o + 1] {
                        if values[p] != 0.0 {
                            ncrd.push(crd[p]);
                            nval.push(values[p]);
                        }
                    }
                    npos.push(ncrd.len());
                }
                Self {
                    payload: Payload::Compressed {
                        pos: npos,
                        crd: ncrd,
                        values: nval,
                    },
                    ..self
                }
            }
        }
    }

    /// Row-major dense grid of the logical matrix.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        let rows_outer = self.outer_is_rows();
        let inner_ext = self.inner_extent();
        let mut put = |outer: usize, inner: usize, v: f64| {
            let (r, c) = if rows_outer { (outer, inner) } else { (inner, outer) };
            out[r * self.cols + c] = v;
        };
        match &self.payload {
            Payload::Dense { values } => {
                for (i, &v) in values.iter().enumerate() {
                    put(i / inner_ext.max(1), i % inner_ext.max(1), v);
                }
            }
            Payload::Compressed { pos, crd, values } => {
                for o in 0..pos.len() - 1 {
                    for p in pos[o]..pos[o + 1] {
                        put(o, crd[p], values[p]);
                    }
                }
            }
        }
        out
    }

    /// Sub-matrix over logical row and column ranges, in the same format.
    pub fn submatrix(
        &self,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Result<StoredMatrix> {
        if rows.end > self.rows || cols.end > self.cols {
            return Err(Error::Shape(format!(
                "sub-range {rows:?}x{cols:?} exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        let grid = self.to_row_major();
        let (nr, nc) = (rows.len(), cols.len());
        let mut values = Vec::with_capacity(nr * nc);
        for r in rows {
            values.extend_from_slice(&grid[r * self.cols + cols.start..r * self.cols + cols.end]);
        }
        let dense = StoredMatrix::dense(self.role, nr, nc, values)?;
        compress(&dense, self.ccf)
    }

    /// Reorders logical rows (`perm[i]` is the source row of row `i`).
    pub fn permute_rows(&self, perm: &[usize]) -> Result<StoredMatrix> {
        self.permute(perm, true)
    }

    /// Reorders logical columns (`perm[j]` is the source column of column `j`).
    pub fn permute_cols(&self, perm: &[usize]) -> Result<StoredMatrix> {
        self.permute(perm, false)
    }

    fn permute(&self, perm: &[usize], rows: bool) -> Result<StoredMatrix> {
        let len = if rows { self.rows } else { self.cols };
        if perm.len() != len {
            return Err(Error::Shape(format!(
                "permutation of length {} for extent {len}",
                perm.len()
            )));
        }
        let grid = self.to_row_major();
        let mut values = vec![0.0; grid.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (sr, sc) = if rows { (perm[r], c) } else { (r, perm[c]) };
                values[r * self.cols + c] = grid[sr * self.cols + sc];
            }
        }
        let dense = StoredMatrix::dense(self.role, self.rows, self.cols, values)?;
        compress(&dense, self.ccf)
    }
}

/// Compresses (or reorders) a dense matrix into `target`.
pub fn compress(dense: &StoredMatrix, target: CcfDescriptor) -> Result<StoredMatrix> {
    if !dense.is_dense() {
        return Err(Error::NotDense(dense.ccf.to_string()));
    }
    target.check_role(dense.role)?;
    let outer_is_rows = target.outer_dim == dense.role.dims().0;
    let (outer, inner) = if outer_is_rows {
        (dense.rows, dense.cols)
    } else {
        (dense.cols, dense.rows)
    };
    let at = |o: usize, i: usize| {
        if outer_is_rows {
            dense.get(o, i)
        } else {
            dense.get(i, o)
        }
    };
    let payload = if target.is_compressed() {
        let mut pos = Vec::with_capacity(outer + 1);
        let mut crd = Vec::new();
        let mut values = Vec::new();
        pos.push(0);
        for o in 0..outer {
            for i in 0..inner {
                let v = at(o, i);
                if v != 0.0 {
                    crd.push(i);
                    values.push(v);
                }
            }
            pos.push(crd.len());
        }
        Payload::Compressed { pos, crd, values }
    } else {
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                values.push(at(o, i));
            }
        }
        Payload::Dense { values }
    };
    let out = StoredMatrix {
        role: dense.role,
        rows: dense.rows,
        cols: dense.cols,
        ccf: target,
        payload,
    };
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// Expands any stored matrix into a row-major dense matrix.
pub fn decompress(m: &StoredMatrix) -> Result<StoredMatrix> {
    m.validate()?;
    StoredMatrix::dense(m.role, m.rows, m.cols, m.to_row_major())
}

/// Re-lays out `m` in `target`.
pub fn convert(m: &StoredMatrix, target: CcfDescriptor) -> Result<StoredMatrix> {
    target.check_role(m.role)?;
    if m.ccf == target {
        m.validate()?;
        return Ok(m.clone());
    }
    let dense = decompress(m)?;
    compress(&dense, target)
}

/// Bytes needed to hold `m`: dense cells, or values+coordinates+positions.
pub fn storage_bytes(m: &StoredMatrix, value_bytes: u64, index_bytes: u64) -> u64 {
    match &m.payload {
        Payload::Dense { values } => values.len() as u64 * value_bytes,
        Payload::Compressed { pos, values, .. } => {
            values.len() as u64 * (value_bytes + index_bytes) + pos.len() as u64 * index_bytes
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::parse_ccf;

    fn identity(role: Role, n: usize) -> StoredMatrix {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        StoredMatrix::dense(role, n, n, v).unwrap()
    }

    #[test]
    fn identity_csr() {
        let c = compress(&identity(Role::A, 3), parse_ccf("UMCK").unwrap()).unwrap();
        assert_eq!(
            c.payload(),
            &Payload::Compressed {
                pos: vec![0, 1, 2, 3],
                crd: vec![0, 1, 2],
                values: vec![1.0, 1.0, 1.0]
            }
        );
        assert_eq!(decompress(&c).unwrap(), identity(Role::A, 3));
    }

    #[test]
    fn all_zero_csr() {
        let z = StoredMatrix::zeros(Role::A, 2, 2);
        let c = compress(&z, parse_ccf("UMCK").unwrap()).unwrap();
        assert_eq!(
            c.payload(),
            &Payload::Compressed {
                pos: vec![0, 0, 0],
                crd: vec![],
                values: vec![]
            }
        );
    }

    #[test]
    fn dense_decompress_is_identity() {
        let d = StoredMatrix::dense(Role::B, 2, 3, vec![1., 0., 2., 0., 3., 4.]).unwrap();
        assert_eq!(decompress(&d).unwrap(), d);
    }

    #[test]
    fn csr_to_csc_identity_is_symmetric() {
        let csr = compress(&identity(Role::A, 3), parse_ccf("UMCK").unwrap()).unwrap();
        let csc = convert(&csr, parse_ccf("UKCM").unwrap()).unwrap();
        assert_eq!(csr.payload(), csc.payload());
        let dense = convert(&csr, parse_ccf("UMUK").unwrap()).unwrap();
        assert!(dense.is_dense());
        assert_eq!(dense, identity(Role::A, 3));
    }

    #[test]
    fn reordered_dense_layout() {
        let d = StoredMatrix::dense(Role::A, 2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let t = compress(&d, parse_ccf("UKUM").unwrap()).unwrap();
        assert_eq!(t.dense_values(), &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(t.get(1, 2), 6.0);
        assert_eq!(decompress(&t).unwrap(), d);
    }

    #[test]
    fn compress_rejects_wrong_role() {
        let d = identity(Role::A, 2);
        assert!(matches!(
            compress(&d, parse_ccf("UNCK").unwrap()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn compress_rejects_compressed_input() {
        let c = compress(&identity(Role::A, 2), parse_ccf("UMCK").unwrap()).unwrap();
        assert!(matches!(compress(&c, parse_ccf("UKCM").unwrap()), Err(Error::NotDense(_))));
    }

    #[test]
    fn storage_bytes_examples() {
        assert_eq!(storage_bytes(&identity(Role::A, 4), 4, 4), 64);
        let c = compress(&identity(Role::A, 3), parse_ccf("UMCK").unwrap()).unwrap();
        assert_eq!(storage_bytes(&c, 4, 4), 3 * 8 + 4 * 4);
    }

    #[test]
    fn validate_catches_corruption() {
        let ccf = parse_ccf("UMCK").unwrap();
        let bad = [
            Payload::Compressed { pos: vec![0, 2, 1, 3], crd: vec![0, 1, 2], values: vec![1.; 3] },
            Payload::Compressed { pos: vec![0, 1, 2, 3], crd: vec![0, 5, 2], values: vec![1.; 3] },
            Payload::Compressed { pos: vec![0, 2, 2, 3], crd: vec![1, 0, 2], values: vec![1.; 3] },
            Payload::Compressed { pos: vec![1, 1, 2, 3], crd: vec![0, 1, 2], values: vec![1.; 3] },
            Payload::Compressed { pos: vec![0, 1, 2, 4], crd: vec![0, 1, 2], values: vec![1.; 3] },
        ];
        for p in bad {
            let m = StoredMatrix::from_parts_unchecked(Role::A, 3, 3, ccf, p.clone());
            assert!(matches!(decompress(&m), Err(Error::InvalidPayload(_))), "{p:?}");
        }
    }

    #[test]
    fn normalize_drops_explicit_zeros() {
        let m = StoredMatrix::from_parts(
            Role::A,
            2,
            2,
            parse_ccf("UMCK").unwrap(),
            Payload::Compressed { pos: vec![0, 2, 3], crd: vec![0, 1, 1], values: vec![5., 0., 7.] },
        )
        .unwrap()
        .normalize();
        assert_eq!(
            m.payload(),
            &Payload::Compressed { pos: vec![0, 1, 2], crd: vec![0, 1], values: vec![5., 7.] }
        );
    }

    #[test]
    fn submatrix_and_permute() {
        let d = StoredMatrix::dense(Role::A, 3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let c = compress(&d, parse_ccf("UKCM").unwrap()).unwrap();
        let s = c.submatrix(1..3, 0..2).unwrap();
        assert_eq!(s.ccf(), c.ccf());
        assert_eq!(s.to_row_major(), vec![4., 5., 7., 8.]);
        let p = c.permute_rows(&[2, 0, 1]).unwrap();
        assert_eq!(p.to_row_major(), vec![7., 8., 9., 1., 2., 3., 4., 5., 6.]);
        let q = d.permute_cols(&[1, 2, 0]).unwrap();
        assert_eq!(q.to_row_major(), vec![2., 3., 1., 5., 6., 4., 8., 9., 7.]);
    }
}
