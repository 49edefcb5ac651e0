//! Builtin workload suite, MatrixMarket ingestion, synthetic specs and the
//! JSON spec file.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{gen_uniform_random, read_matrix_market, Role, StoredMatrix};
use crate::kernel_spec::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub name: String,
    pub application: String,
    pub spec: KernelSpec,
}

// name, application, M, K, N, density % of A, density % of B
const SUITE: [(&str, &str, usize, usize, usize, f64, f64); 9] = [
    ("chem97ZtZ", "Stat Problem", 2500, 2500, 1200, 0.11, 100.0),
    ("journals", "Weighted Graph", 124, 124, 62, 78.5, 100.0),
    ("m3plates", "Acoustics", 11000, 11000, 5500, 0.0054, 100.0),
    ("synthetic_dense", "Varies", 5000, 5000, 2500, 100.0, 100.0),
    ("bibd_81_3", "Combinatorial", 3200, 85000, 43000, 0.093, 100.0),
    ("speech", "Deep Learning", 7700, 2600, 1300, 5.0, 100.0),
    ("gnmt", "Deep Learning", 1600, 1000, 36000, 50.0, 30.0),
    ("transformer", "Deep Learning", 32000, 84, 1000, 50.0, 30.0),
    ("citeseer", "GNN", 3300, 3300, 3700, 0.11, 0.85),
];

/// The nine-workload evaluation suite. Densities are given in percent and
/// converted to fractions; B at 100% is delivered dense.
pub fn builtin_suite() -> Vec<WorkloadEntry> {
    SUITE
        .iter()
        .map(|&(name, app, m, k, n, pa, pb)| WorkloadEntry {
            name: name.to_string(),
            application: app.to_string(),
            spec: KernelSpec::new(name, m, k, n, pa / 100.0, pb / 100.0),
        })
        .collect()
}

pub fn builtin(name: &str) -> Option<WorkloadEntry> {
    builtin_suite().into_iter().find(|w| w.name == name)
}

/// Reads a MatrixMarket file as a `U_M C_K` matrix and its density.
pub fn load_mtx(path: &Path) -> Result<(StoredMatrix, f64)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let m = read_matrix_market(BufReader::new(f))?;
    let d = m.density();
    Ok((m, d))
}

/// `A·Aᵀ` for a matrix read from `path`, with operands attached.
pub fn mtx_gram_spec(path: &Path) -> Result<WorkloadEntry> {
    let (a, _) = load_mtx(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mtx".into());
    let grid = a.to_row_major();
    let (r, c) = (a.rows(), a.cols());
    let mut t = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            t[j * r + i] = grid[i * c + j];
        }
    }
    let a = StoredMatrix::dense(Role::A, r, c, grid)?;
    let b = StoredMatrix::dense(Role::B, c, r, t)?;
    mtx_entry(name, a, b)
}

/// `A·B` for two matrices read from files.
pub fn mtx_pair_spec(a_path: &Path, b_path: &Path) -> Result<WorkloadEntry> {
    let (a, _) = load_mtx(a_path)?;
    let (b, _) = load_mtx(b_path)?;
    let name = a_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mtx".into());
    let a = StoredMatrix::dense(Role::A, a.rows(), a.cols(), a.to_row_major())?;
    let b = StoredMatrix::dense(Role::B, b.rows(), b.cols(), b.to_row_major())?;
    mtx_entry(name, a, b)
}

fn mtx_entry(name: String, a: StoredMatrix, b: StoredMatrix) -> Result<WorkloadEntry> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "A is {}x{} but B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (da, db) = (a.density(), b.density());
    if da == 0.0 || db == 0.0 {
        return Err(Error::Workload(format!("`{name}` has an operand with no nonzeros")));
    }
    let spec = KernelSpec::new(name.clone(), a.rows(), a.cols(), b.cols(), da, db).with_operands(a, b)?;
    Ok(WorkloadEntry {
        name,
        application: "MatrixMarket".into(),
        spec,
    })
}

/// Uniform random spec; with `materialize`, operands are generated from
/// `seed` (A) and `seed + 1` (B) and attached.
pub fn synth_spec(
    m: usize,
    k: usize,
    n: usize,
    d_a: f64,
    d_b: f64,
    seed: u64,
    materialize: bool,
) -> Result<WorkloadEntry> {
    let name = format!("synth-{m}x{k}x{n}-{d_a}-{d_b}-s{seed}");
    let mut spec = KernelSpec::new(name.clone(), m, k, n, d_a, d_b);
    spec.validate()?;
    if materialize {
        let a = gen_uniform_random(Role::A, m, k, d_a, seed)?;
        let b = gen_uniform_random(Role::B, k, n, d_b, seed.wrapping_add(1))?;
        let (ca, cb) = (spec.ccf_a, spec.ccf_b);
        spec = spec.with_operands(a, b)?;
        // keep the delivered formats implied by the requested densities
        spec = spec.with_ccfs(ca, cb);
    }
    Ok(WorkloadEntry {
        name,
        application: "synthetic".into(),
        spec,
    })
}

/// JSON spec file: `{"kernels": [KernelSpec, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub kernels: Vec<KernelSpec>,
}

pub fn read_spec_file(path: &Path) -> Result<Vec<KernelSpec>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let sf: SpecFile = serde_json::from_reader(BufReader::new(f))?;
    for s in &sf.kernels {
        s.validate()?;
    }
    Ok(sf.kernels)
}

pub fn write_spec_file(path: &Path, kernels: &[KernelSpec]) -> Result<()> {
    let sf = SpecFile {
        kernels: kernels.to_vec(),
    };
    let s = serde_json::to_string_pretty(&sf)?;
    std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

/// The four-task queue used to illustrate many-kernel scheduling: one
/// dense, one single-sparse, one K-heavy sparse and one N-heavy sparse task.
pub fn demo_queue() -> Vec<KernelSpec> {
    vec![
        KernelSpec::new("red", 128, 128, 128, 1.0, 1.0),
        KernelSpec::new("blue", 2048, 512, 64, 0.1, 1.0),
        KernelSpec::new("green", 64, 4096, 64, 0.1, 0.1),
        KernelSpec::new("orange", 64, 64, 4096, 0.1, 0.1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn suite_rows() {
        let s = builtin_suite();
        assert_eq!(s.len(), 9);
        let t = builtin("transformer").unwrap().spec;
        assert_eq!((t.m, t.k, t.n), (32000, 84, 1000));
        assert_eq!((t.d_a, t.d_b), (0.5, 0.3));
        let d = builtin("synthetic_dense").unwrap().spec;
        assert_eq!((d.d_a, d.d_b), (1.0, 1.0));
        assert_eq!(d.ccf_a.to_string(), "UMUK");
        let c = builtin("chem97ZtZ").unwrap().spec;
        assert_eq!((c.m, c.k, c.n), (2500, 2500, 1200));
        assert!((c.d_a - 0.0011).abs() < 1e-15);
        assert_eq!(c.ccf_b.to_string(), "UKUN");
    }

    #[test]
    fn load_diagonal() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n2 2 7\n").unwrap();
        let (m, d) = load_mtx(f.path()).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(m.to_row_major(), vec![5., 0., 0., 7.]);
        assert_eq!(d, m.nnz() as f64 / 4.0);
    }

    #[test]
    fn load_out_of_range() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").unwrap();
        assert!(load_mtx(f.path()).is_err());
    }

    #[test]
    fn synth_variants() {
        let w = synth_spec(8, 8, 8, 0.5, 0.5, 3, false).unwrap();
        assert!(w.spec.operands.is_none());
        let w = synth_spec(8, 8, 8, 1.0, 0.5, 3, true).unwrap();
        let ops = w.spec.operands.as_ref().unwrap();
        assert!(ops.a.to_row_major().iter().all(|v| *v != 0.0));
        assert_eq!(synth_spec(8, 8, 8, 0.3, 0.5, 9, true).unwrap(), synth_spec(8, 8, 8, 0.3, 0.5, 9, true).unwrap());
    }

    #[test]
    fn spec_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("suite.json");
        let specs: Vec<KernelSpec> = builtin_suite().into_iter().map(|w| w.spec).collect();
        write_spec_file(&p, &specs).unwrap();
        assert_eq!(read_spec_file(&p).unwrap(), specs);
    }

    #[test]
    fn gram_spec() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "%%MatrixMarket matrix coordinate real general\n2 3 2\n1 3 2\n2 1 4\n").unwrap();
        let w = mtx_gram_spec(f.path()).unwrap();
        assert_eq!((w.spec.m, w.spec.k, w.spec.n), (2, 3, 2));
        assert!(w.spec.operands.is_some());
    }
}
