use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plan::{regions_into, Evaluator, PartitionPlan, PlanScore, Region, RegionKind, ScheduleReport};
use crate::archtemplate::AespaConfig;
use crate::costmodel::{Bandwidth, CcfPair};
use crate::error::{Error, Result};
use crate::kernel_spec::KernelSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Makespan,
    Edp,
}

impl Objective {
    fn key(self, s: &PlanScore) -> f64 {
        match self {
            Objective::Makespan => s.makespan as f64,
            Objective::Edp => s.edp,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "makespan" => Ok(Objective::Makespan),
            "edp" => Ok(Objective::Edp),
            _ => Err(Error::Config(format!("objective must be `makespan` or `edp`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Makespan => "makespan",
            Objective::Edp => "edp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub objective: Objective,
    /// Cut points per dimension are `i / grid` of the extent, `i = 0..=grid`.
    pub grid: usize,
    pub charge_conversion: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Makespan,
            grid: 8,
            charge_conversion: false,
        }
    }
}

/// Objective key, first-part sizes and the (cluster, pair) of each region.
type Best = (f64, (usize, usize, usize), Vec<(usize, CcfPair)>);

/// Distinct cut sizes of `ext` on the grid, ascending.
pub fn grid_cuts(ext: usize, grid: usize) -> Vec<usize> {
    let grid = grid.max(1);
    let mut v: Vec<usize> = (0..=grid)
        .map(|i| (ext as f64 * i as f64 / grid as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Best plan for `spec` on `config` under `objective` with the default grid.
pub fn search_single_kernel(
    spec: &KernelSpec,
    config: &AespaConfig,
    bw: Bandwidth,
    objective: Objective,
) -> Result<(PartitionPlan, ScheduleReport)> {
    search_with(
        spec,
        config,
        bw,
        &SearchOptions {
            objective,
            ..SearchOptions::default()
        },
    )
}

/// Enumerates every grid cut combination and every placement of the
/// resulting regions on supporting clusters. Ties keep the first plan in
/// (m cut, n cut, k cut, cluster index, pair) order.
pub fn search_with(
    spec: &KernelSpec,
    config: &AespaConfig,
    bw: Bandwidth,
    opts: &SearchOptions,
) -> Result<(PartitionPlan, ScheduleReport)> {
    spec.validate()?;
    let params = config.model_params(opts.charge_conversion);
    let mut ev = Evaluator::new(spec, config, bw, params);

    let options: Vec<Vec<(usize, CcfPair)>> = RegionKind::ALL
        .iter()
        .map(|rk| {
            let mut o = Vec::new();
            for (ci, c) in config.clusters.iter().enumerate() {
                for &p in rk.pairs() {
                    if c.kind.supports(p) {
                        o.push((ci, p));
                    }
                }
            }
            o
        })
        .collect();
    let opt_of = |rk: RegionKind| &options[rk as usize];

    let (mc, nc, kc) = (
        grid_cuts(spec.m, opts.grid),
        grid_cuts(spec.n, opts.grid),
        grid_cuts(spec.k, opts.grid),
    );
    let mut regions: Vec<Region> = Vec::with_capacity(5);
    let mut idx: Vec<usize> = Vec::with_capacity(5);
    let mut best: Option<Best> = None;

    for &m0 in &mc {
        for &n0 in &nc {
            for &k0 in &kc {
                regions_into(spec, m0, n0, k0, &mut regions);
                if regions.iter().any(|r| opt_of(r.kind).is_empty()) {
                    continue;
                }
                let parts = if k0 > 0 && k0 < spec.k { 2 } else { 1 };
                idx.clear();
                idx.resize(regions.len(), 0);
                loop {
                    let it = regions
                        .iter()
                        .zip(&idx)
                        .map(|(r, &i)| {
                            let (c, p) = opt_of(r.kind)[i];
                            (r, c, p)
                        });
                    let (score, _) = ev.score(it, parts, false)?;
                    let key = opts.objective.key(&score);
                    if best.as_ref().is_none_or(|b| key < b.0) {
                        let choice = regions
                            .iter()
                            .zip(&idx)
                            .map(|(r, &i)| opt_of(r.kind)[i])
                            .collect();
                        best = Some((key, (m0, n0, k0), choice));
                    }
                    // odometer, last region fastest
                    let mut carry = true;
                    let mut pos = regions.len();
                    while carry && pos > 0 {
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < opt_of(regions[pos].kind).len() {
                            carry = false;
                        } else {
                            idx[pos] = 0;
                        }
                    }
                    if carry {
                        break;
                    }
                }
            }
        }
    }

    let (_, (m0, n0, k0), choice) = best.ok_or_else(|| Error::NoFeasiblePlan(spec.id.clone()))?;
    let mut next = choice.into_iter();
    let plan = PartitionPlan::from_template(spec, m0, n0, k0, |_| next.next().expect("one per region"));
    let it = plan.assignments.iter().map(|a| (&a.region, a.cluster, a.pair));
    let (_, report) = ev.score(it, plan.k_partitions(), true)?;
    Ok((plan, report.expect("detail requested")))
}
