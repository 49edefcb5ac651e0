use std::ops::Range;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::density::DensityMap;
use crate::archtemplate::AespaConfig;
use crate::costmodel::{
    breakdown, ceil_cycles, region_cost, Bandwidth, CcfPair, CostBreakdown, DataflowKind,
    ModelParams,
};
use crate::error::{Error, Result};
use crate::kernel_spec::KernelSpec;

/// Role of a region in the split template. The first four live in the
/// leading K part and are named by which operand is treated as sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// `M0 × N0`, both operands dense.
    DenseDense,
    /// `M1 × N0`, A compressed.
    SparseDense,
    /// `M0 × N1`, B compressed.
    DenseSparse,
    /// `M1 × N1`, both compressed.
    SparseSparse,
    /// Full `M × N` over the trailing K part, both compressed.
    KTail,
}

impl RegionKind {
    pub const ALL: [RegionKind; 5] = [
        RegionKind::DenseDense,
        RegionKind::SparseDense,
        RegionKind::DenseSparse,
        RegionKind::SparseSparse,
        RegionKind::KTail,
    ];

    /// Pairs the search may place on this region.
    pub fn pairs(self) -> &'static [CcfPair] {
        match self {
            RegionKind::DenseDense => &[CcfPair::DENSE],
            RegionKind::SparseDense => &[CcfPair::SPARSE_A],
            RegionKind::DenseSparse => &[CcfPair::SPARSE_B],
            RegionKind::SparseSparse | RegionKind::KTail => {
                &[CcfPair::INNER, CcfPair::OUTER, CcfPair::GUSTAVSON]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub m: Range<usize>,
    pub k: Range<usize>,
    pub n: Range<usize>,
}

impl Region {
    pub fn volume(&self) -> u64 {
        self.m.len() as u64 * self.k.len() as u64 * self.n.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub region: Region,
    pub cluster: usize,
    pub pair: CcfPair,
}

/// An M/N/K split of one kernel with each region placed on a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Interior cut points, `None` when that dimension is not split.
    pub m_cut: Option<usize>,
    pub n_cut: Option<usize>,
    pub k_cut: Option<usize>,
    pub assignments: Vec<Assignment>,
    pub merge_required: bool,
}

fn interior(cut: usize, ext: usize) -> Option<usize> {
    (cut > 0 && cut < ext).then_some(cut)
}

/// Non-empty template regions for first-part sizes `m0`, `n0`, `k0`.
pub fn template_regions(m: usize, k: usize, n: usize, m0: usize, n0: usize, k0: usize) -> Vec<Region> {
    let mut out = Vec::with_capacity(5);
    template_regions_into(m, k, n, m0, n0, k0, &mut out);
    out
}

fn template_regions_into(
    m: usize,
    k: usize,
    n: usize,
    m0: usize,
    n0: usize,
    k0: usize,
    out: &mut Vec<Region>,
) {
    out.clear();
    let (m0, n0, k0) = (m0.min(m), n0.min(n), k0.min(k));
    if k0 > 0 {
        let parts = [
            (RegionKind::DenseDense, 0..m0, 0..n0),
            (RegionKind::SparseDense, m0..m, 0..n0),
            (RegionKind::DenseSparse, 0..m0, n0..n),
            (RegionKind::SparseSparse, m0..m, n0..n),
        ];
        for (kind, mr, nr) in parts {
            if !mr.is_empty() && !nr.is_empty() {
                out.push(Region {
                    kind,
                    m: mr,
                    k: 0..k0,
                    n: nr,
                });
            }
        }
    }
    if k0 < k {
        out.push(Region {
            kind: RegionKind::KTail,
            m: 0..m,
            k: k0..k,
            n: 0..n,
        });
    }
}

impl PartitionPlan {
    /// Builds a template plan; `place` picks (cluster, pair) per region.
    pub fn from_template(
        spec: &KernelSpec,
        m0: usize,
        n0: usize,
        k0: usize,
        mut place: impl FnMut(RegionKind) -> (usize, CcfPair),
    ) -> Self {
        let regions = template_regions(spec.m, spec.k, spec.n, m0, n0, k0);
        let assignments = regions
            .into_iter()
            .map(|region| {
                let (cluster, pair) = place(region.kind);
                Assignment {
                    region,
                    cluster,
                    pair,
                }
            })
            .collect();
        let k0 = k0.min(spec.k);
        Self {
            m: spec.m,
            k: spec.k,
            n: spec.n,
            m_cut: interior(m0.min(spec.m), spec.m),
            n_cut: interior(n0.min(spec.n), spec.n),
            k_cut: interior(k0, spec.k),
            assignments,
            merge_required: k0 > 0 && k0 < spec.k,
        }
    }

    /// The whole kernel as one region on one cluster.
    pub fn whole(spec: &KernelSpec, cluster: usize, pair: CcfPair) -> Self {
        let (m0, n0, k0) = match pair {
            CcfPair::DENSE => (spec.m, spec.n, spec.k),
            CcfPair::SPARSE_A => (0, spec.n, spec.k),
            CcfPair::SPARSE_B => (spec.m, 0, spec.k),
            _ => (0, 0, spec.k),
        };
        Self::from_template(spec, m0, n0, k0, |_| (cluster, pair))
    }

    /// Number of K partitions whose partial outputs must be summed.
    pub fn k_partitions(&self) -> usize {
        let mut ks: Vec<(usize, usize)> = self
            .assignments
            .iter()
            .map(|a| (a.region.k.start, a.region.k.end))
            .collect();
        ks.sort_unstable();
        ks.dedup();
        ks.len().max(1)
    }

    /// Checks that the regions tile the M×K×N space exactly and that each
    /// pair is supported by its cluster.
    pub fn validate(&self, spec: &KernelSpec, config: &AespaConfig) -> Result<()> {
        if (self.m, self.k, self.n) != (spec.m, spec.k, spec.n) {
            return Err(Error::InvalidPlan(format!(
                "plan is for {}x{}x{}, spec is {}x{}x{}",
                self.m, self.k, self.n, spec.m, spec.k, spec.n
            )));
        }
        if self.assignments.is_empty() {
            return Err(Error::InvalidPlan("plan has no assignments".into()));
        }
        let mut vol = 0u64;
        for (i, a) in self.assignments.iter().enumerate() {
            let r = &a.region;
            if r.m.end > self.m || r.k.end > self.k || r.n.end > self.n || r.volume() == 0 {
                return Err(Error::InvalidPlan(format!("region {i} is empty or out of bounds")));
            }
            let Some(entry) = config.clusters.get(a.cluster) else {
                return Err(Error::InvalidPlan(format!("region {i} names cluster {}", a.cluster)));
            };
            if !entry.kind.supports(a.pair) {
                return Err(Error::UnsupportedPair {
                    kind: entry.kind,
                    pair: a.pair,
                });
            }
            for b in &self.assignments[..i] {
                let o = |x: &Range<usize>, y: &Range<usize>| x.start < y.end && y.start < x.end;
                if o(&r.m, &b.region.m) && o(&r.k, &b.region.k) && o(&r.n, &b.region.n) {
                    return Err(Error::InvalidPlan(format!("region {i} overlaps another region")));
                }
            }
            vol += r.volume();
        }
        if vol != self.m as u64 * self.k as u64 * self.n as u64 {
            return Err(Error::InvalidPlan("regions do not cover the iteration space".into()));
        }
        let merge = self.k_partitions() > 1;
        if merge != self.merge_required {
            return Err(Error::InvalidPlan("merge_required disagrees with the K split".into()));
        }
        Ok(())
    }
}

/// Merge cycles for summing `parts` partial M×N outputs on every PE.
pub fn merge_cycles(spec: &KernelSpec, parts: usize, config: &AespaConfig) -> u64 {
    if parts <= 1 {
        return 0;
    }
    let adds = (parts - 1) as f64 * spec.m as f64 * spec.n as f64;
    ceil_cycles(adds / config.total_pes().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub kind: RegionKind,
    pub cluster: usize,
    pub pair: CcfPair,
    pub compute_cycles: u64,
    pub d_a: f64,
    pub d_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub index: usize,
    pub kind: DataflowKind,
    pub pe_count: u64,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub kernel: String,
    pub config: String,
    pub regions: Vec<RegionReport>,
    pub clusters: Vec<ClusterReport>,
    pub traffic_bytes: u64,
    pub memory_cycles: u64,
    pub merge_cycles: u64,
    pub makespan_cycles: u64,
    pub total_energy: f64,
    pub edp: f64,
    pub effective_utilization: f64,
}

impl ScheduleReport {
    /// Compute cycles summed over the regions placed on `cluster`.
    pub fn cluster_compute(&self, cluster: usize) -> u64 {
        self.clusters[cluster].cost.compute_cycles
    }
}

/// Scalar outcome used to rank plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanScore {
    pub makespan: u64,
    pub energy: f64,
    pub edp: f64,
}

#[derive(Clone, Copy)]
struct Block {
    b_operand: bool,
    r: (usize, usize),
    c: (usize, usize),
    fmt: crate::formats::CcfDescriptor,
    bytes: u64,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    active: bool,
    compute: u64,
    performed: f64,
    effectual: f64,
    traffic: u64,
    conversion: u64,
}

/// Shared state for evaluating many plans of one (spec, config) pair.
pub(crate) struct Evaluator<'a> {
    pub spec: &'a KernelSpec,
    pub config: &'a AespaConfig,
    pub bw: Bandwidth,
    pub params: ModelParams,
    pub density: DensityMap,
    clusters: Vec<crate::costmodel::ClusterConfig>,
    accs: Vec<Acc>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a KernelSpec, config: &'a AespaConfig, bw: Bandwidth, params: ModelParams) -> Self {
        Self {
            spec,
            config,
            bw,
            params,
            density: DensityMap::new(spec),
            clusters: config.cluster_configs(),
            accs: vec![Acc::default(); config.clusters.len()],
        }
    }

    fn sub_spec(&self, r: &Region) -> KernelSpec {
        let d_a = self.density.a(r.m.clone(), r.k.clone());
        let d_b = self.density.b(r.k.clone(), r.n.clone());
        self.spec.sub(r.m.len(), r.k.len(), r.n.len(), d_a, d_b)
    }

    /// Scores a plan given as (region, cluster, pair) triples. When
    /// `detail` is set, the full report is produced as well.
    pub fn score<'r>(
        &mut self,
        assignments: impl Iterator<Item = (&'r Region, usize, CcfPair)> + Clone,
        parts: usize,
        detail: bool,
    ) -> Result<(PlanScore, Option<ScheduleReport>)> {
        for a in self.accs.iter_mut() {
            *a = Acc::default();
        }
        let mut blocks: SmallVec<[Block; 10]> = SmallVec::new();
        let mut out_bytes = 0u64;
        let mut regions = Vec::new();
        for (r, ci, pair) in assignments {
            let cluster = self
                .clusters
                .get(ci)
                .ok_or_else(|| Error::InvalidPlan(format!("no cluster {ci}")))?;
            let sub = self.sub_spec(r);
            let c = region_cost(cluster, &sub, pair, &self.params)?;
            let conv = self.params.charge_conversion;
            let fa = if conv && pair.a != self.spec.ccf_a { self.spec.ccf_a } else { pair.a };
            let fb = if conv && pair.b != self.spec.ccf_b { self.spec.ccf_b } else { pair.b };
            let acc = &mut self.accs[ci];
            acc.active = true;
            acc.compute += c.compute_cycles;
            acc.performed += c.performed_macs;
            acc.effectual += c.effectual_macs;
            acc.conversion += c.conversion_bytes;
            acc.traffic += c.out_bytes;
            out_bytes += c.out_bytes;
            for (b_operand, rr, cc, fmt, bytes) in [
                (false, (r.m.start, r.m.end), (r.k.start, r.k.end), fa, c.a_bytes),
                (true, (r.k.start, r.k.end), (r.n.start, r.n.end), fb, c.b_bytes),
            ] {
                let seen = blocks
                    .iter()
                    .any(|x| x.b_operand == b_operand && x.r == rr && x.c == cc && x.fmt == fmt);
                if !seen {
                    blocks.push(Block {
                        b_operand,
                        r: rr,
                        c: cc,
                        fmt,
                        bytes,
                    });
                    acc.traffic += bytes;
                }
            }
            if detail {
                regions.push(RegionReport {
                    kind: r.kind,
                    cluster: ci,
                    pair,
                    compute_cycles: c.compute_cycles,
                    d_a: sub.d_a,
                    d_b: sub.d_b,
                });
            }
        }
        let traffic: u64 = out_bytes + blocks.iter().map(|b| b.bytes).sum::<u64>();
        let memory = self.bw.cycles(traffic as f64, self.config.frequency);
        let core = self
            .accs
            .iter()
            .filter(|a| a.active)
            .map(|a| a.compute.max(memory))
            .max()
            .unwrap_or(0);
        let merge = merge_cycles(self.spec, parts, self.config);
        let makespan = core + merge;

        let e = &self.params.energy;
        let mut energy = 0.0;
        let mut effectual = 0.0;
        let mut cluster_reports = Vec::new();
        for (i, (acc, cl)) in self.accs.iter().zip(&self.clusters).enumerate() {
            let cost = if acc.active {
                breakdown(
                    cl,
                    acc.compute,
                    memory,
                    acc.traffic,
                    2 * acc.traffic + acc.conversion,
                    acc.performed,
                    acc.effectual,
                    core,
                    e,
                )
            } else {
                CostBreakdown::idle(cl, core, e)
            };
            energy += cost.energy;
            effectual += acc.effectual;
            if detail {
                cluster_reports.push(ClusterReport {
                    index: i,
                    kind: cl.kind,
                    pe_count: cl.pe_count,
                    cost,
                });
            }
        }
        // merge phase: every PE adds partials, leftover PE-cycles idle
        let adds = parts.saturating_sub(1) as f64 * self.spec.m as f64 * self.spec.n as f64;
        let total_pes = self.config.total_pes() as f64;
        energy += adds * e.e_mac + (total_pes * merge as f64 - adds).max(0.0) * e.e_idle_pe_cycle;
        let edp = crate::costmodel::edp(energy, makespan, self.config.frequency);
        let score = PlanScore {
            makespan,
            energy,
            edp,
        };
        let report = detail.then(|| ScheduleReport {
            kernel: self.spec.id.clone(),
            config: self.config.name.clone(),
            regions,
            clusters: cluster_reports,
            traffic_bytes: traffic,
            memory_cycles: memory,
            merge_cycles: merge,
            makespan_cycles: makespan,
            total_energy: energy,
            edp,
            effective_utilization: if makespan == 0 {
                0.0
            } else {
                (effectual / (total_pes * makespan as f64)).min(1.0)
            },
        });
        Ok((score, report))
    }
}

/// Costs `plan` for `spec` on `config` with the config's default model
/// parameters.
pub fn evaluate_plan(
    plan: &PartitionPlan,
    spec: &KernelSpec,
    config: &AespaConfig,
    bw: Bandwidth,
) -> Result<ScheduleReport> {
    evaluate_plan_with(plan, spec, config, bw, &config.model_params(false))
}

pub fn evaluate_plan_with(
    plan: &PartitionPlan,
    spec: &KernelSpec,
    config: &AespaConfig,
    bw: Bandwidth,
    params: &ModelParams,
) -> Result<ScheduleReport> {
    plan.validate(spec, config)?;
    let mut ev = Evaluator::new(spec, config, bw, *params);
    let it = plan.assignments.iter().map(|a| (&a.region, a.cluster, a.pair));
    let (_, report) = ev.score(it, plan.k_partitions(), true)?;
    Ok(report.expect("detail requested"))
}

pub(crate) fn regions_into(spec: &KernelSpec, m0: usize, n0: usize, k0: usize, out: &mut Vec<Region>) {
    template_regions_into(spec.m, spec.k, spec.n, m0, n0, k0, out)
}
