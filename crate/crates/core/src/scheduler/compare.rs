use serde::Serialize;

use super::search::{search_with, SearchOptions};
use crate::archtemplate::{allocate_with, AespaConfig, Calibration};
use crate::costmodel::{Bandwidth, DataflowKind};
use crate::error::{Error, Result};
use crate::kernel_spec::KernelSpec;

/// Searched single-kernel result of one workload on one preset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub workload: String,
    pub preset: String,
    pub makespan_cycles: u64,
    pub effective_utilization: f64,
    pub energy: f64,
    pub edp: f64,
    /// Baseline makespan over this makespan.
    pub speedup: f64,
    /// Baseline energy over this energy.
    pub energy_improvement: f64,
    /// Baseline EDP over this EDP.
    pub edp_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeomeanRow {
    pub preset: String,
    pub speedup: f64,
    pub effective_utilization: f64,
    pub energy_improvement: f64,
    pub edp_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: String,
    pub bandwidth: Bandwidth,
    /// Workload-major: all presets of workload 0, then workload 1, ...
    pub rows: Vec<ComparisonRow>,
    pub geomean: Vec<GeomeanRow>,
}

pub fn geomean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x.ln();
        n += 1;
    }
    if n == 0 {
        1.0
    } else {
        (s / n as f64).exp()
    }
}

/// Runs the single-kernel search for every (workload, preset) cell and
/// normalizes to `presets[baseline]`.
pub fn compare_baselines(
    suite: &[KernelSpec],
    presets: &[AespaConfig],
    baseline: usize,
    bw: Bandwidth,
    opts: &SearchOptions,
) -> Result<Comparison> {
    if suite.is_empty() {
        return Err(Error::Workload("comparison suite is empty".into()));
    }
    let base = presets
        .get(baseline)
        .ok_or_else(|| Error::Config(format!("baseline index {baseline} out of range")))?;
    let mut rows = Vec::with_capacity(suite.len() * presets.len());
    for spec in suite {
        let (_, b) = search_with(spec, base, bw, opts)?;
        for p in presets {
            let (_, r) = search_with(spec, p, bw, opts)?;
            rows.push(ComparisonRow {
                workload: spec.id.clone(),
                preset: p.name.clone(),
                makespan_cycles: r.makespan_cycles,
                effective_utilization: r.effective_utilization,
                energy: r.total_energy,
                edp: r.edp,
                speedup: b.makespan_cycles as f64 / r.makespan_cycles as f64,
                energy_improvement: b.total_energy / r.total_energy,
                edp_improvement: b.edp / r.edp,
            });
        }
    }
    let np = presets.len();
    let geomean = presets
        .iter()
        .enumerate()
        .map(|(pi, p)| {
            let col = || rows.iter().skip(pi).step_by(np);
            GeomeanRow {
                preset: p.name.clone(),
                speedup: geomean(col().map(|r| r.speedup)),
                effective_utilization: geomean(col().map(|r| r.effective_utilization.max(1e-300))),
                energy_improvement: geomean(col().map(|r| r.energy_improvement)),
                edp_improvement: geomean(col().map(|r| r.edp_improvement)),
            }
        })
        .collect();
    Ok(Comparison {
        baseline: base.name.clone(),
        bandwidth: bw,
        rows,
        geomean,
    })
}

/// Outcome of the heterogeneous design-space sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchedConfig {
    pub config: AespaConfig,
    /// Area share of each kind in units of `1/steps`.
    pub mix: Vec<(DataflowKind, usize)>,
    pub geomean_speedup: f64,
    pub geomean_edp_improvement: f64,
}

/// Sweep settings for [`search_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSearch {
    pub kinds: Vec<DataflowKind>,
    /// Area is split in `1/steps` increments.
    pub steps: usize,
    /// Minimum number of distinct kinds in a mix.
    pub min_kinds: usize,
    pub bandwidth: Bandwidth,
    pub search: SearchOptions,
}

impl Default for ConfigSearch {
    fn default() -> Self {
        Self {
            kinds: vec![
                DataflowKind::Tpu,
                DataflowKind::Eie,
                DataflowKind::ExTensor,
                DataflowKind::OuterSpace,
            ],
            steps: 8,
            min_kinds: 2,
            bandwidth: Bandwidth::ONE_TB_S,
            search: SearchOptions::default(),
        }
    }
}

fn compositions(parts: usize, total: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() + 1 == parts {
        cur.push(total - cur.iter().sum::<usize>());
        out.push(cur.clone());
        cur.pop();
        return;
    }
    let used: usize = cur.iter().sum();
    for x in 0..=total - used {
        cur.push(x);
        compositions(parts, total, cur, out);
        cur.pop();
    }
}

/// Sweeps every area mix of `cs.kinds` in `1/steps` increments and returns
/// the one with the highest geomean speedup over `baseline` on `suite`,
/// ties broken by geomean EDP improvement, then by enumeration order.
pub fn search_config(
    suite: &[KernelSpec],
    baseline: &AespaConfig,
    cs: &ConfigSearch,
    cal: &Calibration,
) -> Result<SearchedConfig> {
    if suite.is_empty() || cs.kinds.is_empty() || cs.steps == 0 {
        return Err(Error::Config("configuration search needs workloads, kinds and steps".into()));
    }
    let area = cal.area_model();
    let base: Vec<_> = suite
        .iter()
        .map(|s| search_with(s, baseline, cs.bandwidth, &cs.search).map(|r| r.1))
        .collect::<Result<_>>()?;
    let mut mixes = Vec::new();
    compositions(cs.kinds.len(), cs.steps, &mut Vec::new(), &mut mixes);
    let mut best: Option<SearchedConfig> = None;
    for mix in mixes {
        if mix.iter().filter(|&&x| x > 0).count() < cs.min_kinds {
            continue;
        }
        let fr: Vec<(DataflowKind, f64)> = cs
            .kinds
            .iter()
            .zip(&mix)
            .filter(|(_, &x)| x > 0)
            .map(|(&k, &x)| (k, x as f64 / cs.steps as f64))
            .collect();
        let Ok(cfg) = allocate_with(&fr, &area, cal) else {
            continue;
        };
        let (mut sp, mut ed) = (Vec::new(), Vec::new());
        for (s, b) in suite.iter().zip(&base) {
            let (_, r) = search_with(s, &cfg, cs.bandwidth, &cs.search)?;
            sp.push(b.makespan_cycles as f64 / r.makespan_cycles as f64);
            ed.push(b.edp / r.edp);
        }
        let (gs, ge) = (geomean(sp), geomean(ed));
        let better = match &best {
            None => true,
            Some(b) => gs > b.geomean_speedup || (gs == b.geomean_speedup && ge > b.geomean_edp_improvement),
        };
        if better {
            best = Some(SearchedConfig {
                config: cfg,
                mix: cs.kinds.iter().copied().zip(mix.iter().copied()).collect(),
                geomean_speedup: gs,
                geomean_edp_improvement: ge,
            });
        }
    }
    let mut out = best.ok_or_else(|| Error::Config("no area mix satisfies the sweep constraints".into()))?;
    out.config.name = "aespa-searched".into();
    out.config.searched = true;
    Ok(out)
}

/// The `aespa-searched` configuration: default sweep over the builtin
/// suite against `homog-eie`.
pub fn default_searched_config() -> Result<AespaConfig> {
    let cal = Calibration::shipped();
    let suite: Vec<KernelSpec> = crate::workloads::builtin_suite().into_iter().map(|w| w.spec).collect();
    let base = crate::archtemplate::preset_with("homog-eie", cal)?;
    Ok(search_config(&suite, &base, &ConfigSearch::default(), cal)?.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_count() {
        let mut out = Vec::new();
        compositions(4, 8, &mut Vec::new(), &mut out);
        // C(11, 3)
        assert_eq!(out.len(), 165);
        assert!(out.iter().all(|m| m.iter().sum::<usize>() == 8));
    }

    #[test]
    fn geomean_basic() {
        assert!((geomean([2.0, 8.0]) - 4.0).abs() < 1e-12);
        assert_eq!(geomean(std::iter::empty()), 1.0);
    }
}
