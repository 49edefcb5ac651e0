//! Instrumented reference kernels for the five sub-accelerator classes.
//!
//! Each kernel follows the loop nest implied by its operand formats and
//! counts exactly what it executes: innermost-body iterations, the
//! multiply-accumulates performed, and metadata comparisons. The output is
//! always a dense M×N matrix.

use serde::Serialize;

use crate::costmodel::DataflowKind;
use crate::error::{Error, Result};
use crate::formats::{CcfDescriptor, Dim, Role, StoredMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KernelCounters {
    pub loop_iterations: u64,
    pub macs: u64,
    pub index_comparisons: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelResult {
    pub output: StoredMatrix,
    pub counters: KernelCounters,
}

const UMUK: CcfDescriptor = CcfDescriptor::dense(Dim::M, Dim::K);
const UKUN: CcfDescriptor = CcfDescriptor::dense(Dim::K, Dim::N);
const UMCK: CcfDescriptor = CcfDescriptor::compressed(Dim::M, Dim::K);
const UNCK: CcfDescriptor = CcfDescriptor::compressed(Dim::N, Dim::K);
const UKCM: CcfDescriptor = CcfDescriptor::compressed(Dim::K, Dim::M);
const UKCN: CcfDescriptor = CcfDescriptor::compressed(Dim::K, Dim::N);

struct Shape {
    m: usize,
    k: usize,
    n: usize,
}

fn check(a: &StoredMatrix, b: &StoredMatrix, fa: CcfDescriptor, fb: CcfDescriptor) -> Result<Shape> {
    if a.role() != Role::A || b.role() != Role::B {
        return Err(Error::Shape(format!(
            "operands have roles ({:?}, {:?}), expected (A, B)",
            a.role(),
            b.role()
        )));
    }
    if a.ccf() != fa || b.ccf() != fb {
        return Err(Error::KernelFormat {
            expected: format!("({fa}, {fb})"),
            a: a.ccf().to_string(),
            b: b.ccf().to_string(),
        });
    }
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "A is {}x{} but B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    a.validate()?;
    b.validate()?;
    Ok(Shape {
        m: a.rows(),
        k: a.cols(),
        n: b.cols(),
    })
}

fn finish(s: &Shape, out: Vec<f64>, counters: KernelCounters) -> KernelResult {
    KernelResult {
        output: StoredMatrix::dense(Role::Output, s.m, s.n, out).expect("sized output"),
        counters,
    }
}

/// `U_M U_K, U_K U_N`: every (m, k, n) point is executed.
pub fn run_dense_gemm(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    let s = check(a, b, UMUK, UKUN)?;
    let (av, bv) = (a.dense_values(), b.dense_values());
    let mut out = vec![0.0; s.m * s.n];
    let mut c = KernelCounters::default();
    for m in 0..s.m {
        for k in 0..s.k {
            let x = av[m * s.k + k];
            for n in 0..s.n {
                out[m * s.n + n] += x * bv[k * s.n + n];
                c.loop_iterations += 1;
                c.macs += 1;
            }
        }
    }
    Ok(finish(&s, out, c))
}

/// SpMM with exactly one operand compressed along K: either
/// `U_M U_K, U_N C_K` or `U_M C_K, U_K U_N`.
pub fn run_spmm_eie(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    match (a.ccf().is_compressed(), b.ccf().is_compressed()) {
        (false, true) => {
            let s = check(a, b, UMUK, UNCK)?;
            let av = a.dense_values();
            let mut out = vec![0.0; s.m * s.n];
            let mut c = KernelCounters::default();
            for m in 0..s.m {
                for n in 0..s.n {
                    let (crd, vals) = b.slice(n);
                    let mut acc = 0.0;
                    for (&k, &v) in crd.iter().zip(vals) {
                        acc += av[m * s.k + k] * v;
                        c.loop_iterations += 1;
                        c.macs += 1;
                    }
                    out[m * s.n + n] = acc;
                }
            }
            Ok(finish(&s, out, c))
        }
        (true, false) => {
            let s = check(a, b, UMCK, UKUN)?;
            let bv = b.dense_values();
            let mut out = vec![0.0; s.m * s.n];
            let mut c = KernelCounters::default();
            for m in 0..s.m {
                let (crd, vals) = a.slice(m);
                for (&k, &v) in crd.iter().zip(vals) {
                    for n in 0..s.n {
                        out[m * s.n + n] += v * bv[k * s.n + n];
                        c.loop_iterations += 1;
                        c.macs += 1;
                    }
                }
            }
            Ok(finish(&s, out, c))
        }
        _ => Err(Error::KernelFormat {
            expected: "(UMUK, UNCK) or (UMCK, UKUN)".into(),
            a: a.ccf().to_string(),
            b: b.ccf().to_string(),
        }),
    }
}

/// Inner-product SpGEMM, `U_M C_K, U_N C_K`. Each output element
/// intersects a row of A with a column of B by a two-pointer merge.
pub fn run_spgemm_inner(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    let s = check(a, b, UMCK, UNCK)?;
    let mut out = vec![0.0; s.m * s.n];
    let mut c = KernelCounters::default();
    for m in 0..s.m {
        let (ak, av) = a.slice(m);
        for n in 0..s.n {
            let (bk, bv) = b.slice(n);
            let (mut pa, mut pb) = (0, 0);
            let mut acc = 0.0;
            while pa < ak.len() && pb < bk.len() {
                let (ka, kb) = (ak[pa], bk[pb]);
                let k = ka.min(kb);
                c.loop_iterations += 1;
                c.index_comparisons += 1;
                if ka == k && kb == k {
                    acc += av[pa] * bv[pb];
                    c.macs += 1;
                }
                pa += usize::from(ka == k);
                pb += usize::from(kb == k);
            }
            out[m * s.n + n] = acc;
        }
    }
    Ok(finish(&s, out, c))
}

/// Outer-product SpGEMM, `U_K C_M, U_K C_N`: one rank-1 update per k.
pub fn run_spgemm_outer(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    let s = check(a, b, UKCM, UKCN)?;
    let mut out = vec![0.0; s.m * s.n];
    let mut c = KernelCounters::default();
    for k in 0..s.k {
        let (am, av) = a.slice(k);
        let (bn, bv) = b.slice(k);
        for (&m, &x) in am.iter().zip(av) {
            for (&n, &y) in bn.iter().zip(bv) {
                out[m * s.n + n] += x * y;
                c.loop_iterations += 1;
                c.macs += 1;
            }
        }
    }
    Ok(finish(&s, out, c))
}

/// Column-wise Gustavson SpGEMM, `U_K C_M, U_N C_K`: for each column of B,
/// stream the columns of A selected by its nonzero rows.
pub fn run_spgemm_gustavson(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    let s = check(a, b, UKCM, UNCK)?;
    let mut out = vec![0.0; s.m * s.n];
    let mut c = KernelCounters::default();
    for n in 0..s.n {
        let (bk, bv) = b.slice(n);
        for (&k, &y) in bk.iter().zip(bv) {
            let (am, av) = a.slice(k);
            for (&m, &x) in am.iter().zip(av) {
                out[m * s.n + n] += x * y;
                c.loop_iterations += 1;
                c.macs += 1;
            }
        }
    }
    Ok(finish(&s, out, c))
}

/// Runs the kernel matching the operands' formats.
pub fn run_for_formats(a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    match (a.ccf(), b.ccf()) {
        (UMUK, UKUN) => run_dense_gemm(a, b),
        (UMUK, UNCK) | (UMCK, UKUN) => run_spmm_eie(a, b),
        (UMCK, UNCK) => run_spgemm_inner(a, b),
        (UKCM, UKCN) => run_spgemm_outer(a, b),
        (UKCM, UNCK) => run_spgemm_gustavson(a, b),
        (fa, fb) => Err(Error::KernelFormat {
            expected: "a supported CCF pair".into(),
            a: fa.to_string(),
            b: fb.to_string(),
        }),
    }
}

/// Runs the kernel of a specific dataflow class; the operand formats must
/// be one of its supported pairs.
pub fn run_dataflow(kind: DataflowKind, a: &StoredMatrix, b: &StoredMatrix) -> Result<KernelResult> {
    let pair = crate::costmodel::CcfPair::new(a.ccf(), b.ccf());
    if !kind.supports(pair) {
        return Err(Error::UnsupportedPair { kind, pair });
    }
    run_for_formats(a, b)
}
