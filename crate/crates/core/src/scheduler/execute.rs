use super::density::DensityMap;
use super::plan::PartitionPlan;
use crate::archtemplate::AespaConfig;
use crate::error::{Error, Result};
use crate::formats::{compress, CcfDescriptor, Role, StoredMatrix};
use crate::kernel_spec::KernelSpec;
use crate::kernels::{run_dataflow, KernelCounters};

/// Runs every assignment of `plan` on the spec's attached operands with the
/// matching kernel, sums K partials into the output and undoes the
/// densest-first reordering.
pub fn execute_plan(
    plan: &PartitionPlan,
    spec: &KernelSpec,
    config: &AespaConfig,
) -> Result<(StoredMatrix, KernelCounters)> {
    plan.validate(spec, config)?;
    let ops = spec
        .operands
        .as_ref()
        .ok_or_else(|| Error::Workload(format!("`{}` has no attached operands", spec.id)))?;
    let dm = DensityMap::new(spec);
    let perm = dm.measured().expect("operands attached");
    let a = ops.a.permute_rows(&perm.row_perm)?.permute_cols(&perm.k_perm)?;
    let b = ops.b.permute_rows(&perm.k_perm)?.permute_cols(&perm.col_perm)?;

    let (m, n) = (spec.m, spec.n);
    let mut out = vec![0.0; m * n];
    let mut total = KernelCounters::default();
    for asg in &plan.assignments {
        let r = &asg.region;
        let kind = config.clusters[asg.cluster].kind;
        let sa = compress(&a.submatrix(r.m.clone(), r.k.clone())?, asg.pair.a)?;
        let sb = compress(&b.submatrix(r.k.clone(), r.n.clone())?, asg.pair.b)?;
        let res = run_dataflow(kind, &sa, &sb)?;
        let part = res.output.dense_values();
        let w = r.n.len();
        for (i, row) in r.m.clone().enumerate() {
            for (j, col) in r.n.clone().enumerate() {
                out[row * n + col] += part[i * w + j];
            }
        }
        total.loop_iterations += res.counters.loop_iterations;
        total.macs += res.counters.macs;
        total.index_comparisons += res.counters.index_comparisons;
    }
    // back to the caller's row and column order
    let mut orig = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            orig[perm.row_perm[i] * n + perm.col_perm[j]] = out[i * n + j];
        }
    }
    let o = StoredMatrix::dense(Role::Output, m, n, orig)?;
    debug_assert_eq!(o.ccf(), CcfDescriptor::row_major(Role::Output));
    Ok((o, total))
}
