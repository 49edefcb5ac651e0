//! Kernel-versus-oracle check run by `verify`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archtemplate::AespaConfig;
use crate::costmodel::{CcfPair, DataflowKind};
use crate::error::{Error, Result};
use crate::formats::{compress, gen_uniform_random, Role, StoredMatrix};
use crate::kernel_spec::KernelSpec;
use crate::kernels::{
    run_dense_gemm, run_spgemm_gustavson, run_spgemm_inner, run_spgemm_outer, run_spmm_eie, KernelCounters,
    KernelResult,
};
use crate::scheduler::{execute_plan, PartitionPlan, RegionKind};

pub const DENSITIES: [f64; 4] = [0.01, 0.1, 0.5, 1.0];

/// Per-kernel totals over all checked instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub kernel: String,
    pub instances: u64,
    pub mismatches: u64,
    pub loop_iterations: u64,
    pub macs: u64,
    pub index_comparisons: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    /// One line per failing instance.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Operand pair supplied by `--fixture`; payloads are checked before use.
#[derive(Debug, Clone, Deserialize)]
pub struct Fixture {
    pub a: StoredMatrix,
    pub b: StoredMatrix,
}

type KernelFn = fn(&StoredMatrix, &StoredMatrix) -> Result<KernelResult>;

const KERNELS: [(&str, CcfPair, KernelFn); 6] = [
    ("dense_gemm", CcfPair::DENSE, run_dense_gemm),
    ("spmm_eie_a", CcfPair::SPARSE_A, run_spmm_eie),
    ("spmm_eie_b", CcfPair::SPARSE_B, run_spmm_eie),
    ("spgemm_inner", CcfPair::INNER, run_spgemm_inner),
    ("spgemm_outer", CcfPair::OUTER, run_spgemm_outer),
    ("spgemm_gustavson", CcfPair::GUSTAVSON, run_spgemm_gustavson),
];

fn triple_loop(a: &StoredMatrix, b: &StoredMatrix) -> Vec<f64> {
    let (ag, bg) = (a.to_row_major(), b.to_row_major());
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut o = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let x = ag[i * k + p];
            for j in 0..n {
                o[i * n + j] += x * bg[p * n + j];
            }
        }
    }
    o
}

fn add(c: &mut VerifyRow, k: &KernelCounters) {
    c.instances += 1;
    c.loop_iterations += k.loop_iterations;
    c.macs += k.macs;
    c.index_comparisons += k.index_comparisons;
}

fn empty_row(name: &str) -> VerifyRow {
    VerifyRow {
        kernel: name.to_string(),
        instances: 0,
        mismatches: 0,
        loop_iterations: 0,
        macs: 0,
        index_comparisons: 0,
    }
}

/// The four-kind, two-PE-per-cluster machine used for the K-split check.
fn split_machine() -> AespaConfig {
    AespaConfig::from_pe_counts(
        "verify",
        &[
            (DataflowKind::Tpu, 2),
            (DataflowKind::Eie, 2),
            (DataflowKind::ExTensor, 2),
            (DataflowKind::OuterSpace, 2),
        ],
    )
    .expect("non-empty machine")
}

fn check_pair(
    label: &str,
    a: &StoredMatrix,
    b: &StoredMatrix,
    rows: &mut [VerifyRow],
    failures: &mut Vec<String>,
) -> Result<()> {
    let want = triple_loop(a, b);
    for (row, (name, pair, f)) in rows.iter_mut().zip(KERNELS) {
        let sa = compress(a, pair.a)?;
        let sb = compress(b, pair.b)?;
        match f(&sa, &sb) {
            Ok(r) => {
                add(row, &r.counters);
                if r.output.dense_values() != want.as_slice() {
                    row.mismatches += 1;
                    failures.push(format!("{label}: {name} output differs from the triple loop"));
                }
            }
            Err(e) => {
                row.instances += 1;
                row.mismatches += 1;
                failures.push(format!("{label}: {name}: {e}"));
            }
        }
    }
    Ok(())
}

/// Runs `seeds` random instances with extents in `1..=max_extent` through
/// every kernel and a split-and-merge plan, comparing each output with a
/// dense triple loop.
pub fn run_verify(seeds: u64, max_extent: usize, base_seed: u64) -> Result<VerifyReport> {
    if max_extent == 0 {
        return Err(Error::Shape("--max-extent must be at least 1".into()));
    }
    let mut rows: Vec<VerifyRow> = KERNELS.iter().map(|k| empty_row(k.0)).collect();
    let mut split = empty_row("split_merge");
    let mut failures = Vec::new();
    let machine = split_machine();
    for i in 0..seeds {
        let seed = base_seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, k, n) = (
            rng.gen_range(1..=max_extent),
            rng.gen_range(1..=max_extent),
            rng.gen_range(1..=max_extent),
        );
        let da = DENSITIES[rng.gen_range(0..DENSITIES.len())];
        let db = DENSITIES[rng.gen_range(0..DENSITIES.len())];
        let a = gen_uniform_random(Role::A, m, k, da, seed.wrapping_mul(2))?;
        let b = gen_uniform_random(Role::B, k, n, db, seed.wrapping_mul(2).wrapping_add(1))?;
        let label = format!("seed {seed} ({m}x{k}x{n}, d_a={da}, d_b={db})");
        check_pair(&label, &a, &b, &mut rows, &mut failures)?;

        let want = triple_loop(&a, &b);
        let spec = KernelSpec::new(format!("verify-{seed}"), m, k, n, da, db).with_operands(a, b)?;
        let plan = PartitionPlan::from_template(&spec, m / 2, n / 2, k / 2, |rk| match rk {
            RegionKind::DenseDense => (0, CcfPair::DENSE),
            RegionKind::SparseDense => (1, CcfPair::SPARSE_A),
            RegionKind::DenseSparse => (1, CcfPair::SPARSE_B),
            RegionKind::SparseSparse => (2, CcfPair::INNER),
            RegionKind::KTail => (3, CcfPair::OUTER),
        });
        match execute_plan(&plan, &spec, &machine) {
            Ok((out, c)) => {
                add(&mut split, &c);
                if out.dense_values() != want.as_slice() {
                    split.mismatches += 1;
                    failures.push(format!("{label}: split_merge output differs from the triple loop"));
                }
            }
            Err(e) => {
                split.instances += 1;
                split.mismatches += 1;
                failures.push(format!("{label}: split_merge: {e}"));
            }
        }
    }
    rows.push(split);
    if seeds == 0 {
        rows.clear();
    }
    Ok(VerifyReport { rows, failures })
}

/// Checks a user-supplied operand pair. Payload invariant violations are
/// reported as failures, not input errors.
pub fn verify_fixture(path: &Path) -> Result<VerifyReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fx: Fixture = serde_json::from_str(&text)?;
    let mut failures = Vec::new();
    for (name, m) in [("a", &fx.a), ("b", &fx.b)] {
        if let Err(e) = m.validate() {
            failures.push(format!("fixture operand {name}: {e}"));
        }
    }
    let mut rows: Vec<VerifyRow> = KERNELS.iter().map(|k| empty_row(k.0)).collect();
    if failures.is_empty() {
        let a = StoredMatrix::dense(Role::A, fx.a.rows(), fx.a.cols(), fx.a.to_row_major())?;
        let b = StoredMatrix::dense(Role::B, fx.b.rows(), fx.b.cols(), fx.b.to_row_major())?;
        if a.cols() != b.rows() {
            return Err(Error::Shape(format!(
                "fixture A is {}x{} but B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        check_pair("fixture", &a, &b, &mut rows, &mut failures)?;
    }
    Ok(VerifyReport { rows, failures })
}
