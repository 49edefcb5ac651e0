//! Whole-kernel assignment of a queue onto clusters.
//!
//! Kernels are placed in queue order. For each candidate cluster the
//! partial schedule plus the candidate is simulated and the cluster giving
//! the kernel the earliest finish wins (lowest index on ties). Clusters run
//! their kernels back to back; HBM bandwidth is split max-min fairly among
//! running kernels, so kernels that need less than an equal share keep
//! their demand and the rest is shared equally by the bandwidth-limited
//! ones. Shares are recomputed at every completion.

use serde::Serialize;

use crate::archtemplate::AespaConfig;
use crate::costmodel::{best_pair, ceil_cycles, Bandwidth, CcfPair, DataflowKind, ModelParams};
use crate::error::{Error, Result};
use crate::kernel_spec::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelPlacement {
    pub kernel: String,
    pub queue_index: usize,
    pub cluster: usize,
    pub kind: DataflowKind,
    pub pair: CcfPair,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyReport {
    pub config: String,
    pub placements: Vec<KernelPlacement>,
    pub total_cycles: u64,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    cluster: usize,
    /// Compute-bound cycles.
    compute: f64,
    /// HBM bytes.
    traffic: f64,
}

/// Start and end time of every job when each cluster runs its jobs in the
/// given order. `bpc` is bytes per cycle, `None` for unlimited.
fn simulate(jobs: &[Job], clusters: usize, bpc: Option<f64>) -> Vec<(f64, f64)> {
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for (i, j) in jobs.iter().enumerate() {
        queues[j.cluster].push(i);
    }
    let mut head = vec![0usize; clusters];
    let mut remaining: Vec<f64> = vec![1.0; jobs.len()];
    let mut times = vec![(0.0, 0.0); jobs.len()];
    let mut now = 0.0f64;
    let mut running: Vec<usize> = Vec::new();
    for q in &queues {
        if let Some(&j) = q.first() {
            running.push(j);
        }
    }
    let mut rates: Vec<f64> = Vec::new();
    while !running.is_empty() {
        // progress per cycle of each running job
        rates.clear();
        match bpc {
            None => rates.extend(running.iter().map(|&j| speed(jobs[j].compute, f64::INFINITY, jobs[j].traffic))),
            Some(total) => {
                let mut order: Vec<usize> = (0..running.len()).collect();
                let demand = |j: &Job| {
                    if j.traffic == 0.0 {
                        0.0
                    } else if j.compute == 0.0 {
                        f64::INFINITY
                    } else {
                        j.traffic / j.compute
                    }
                };
                order.sort_by(|&x, &y| {
                    demand(&jobs[running[x]])
                        .partial_cmp(&demand(&jobs[running[y]]))
                        .expect("finite or inf")
                        .then(x.cmp(&y))
                });
                let mut share = vec![0.0; running.len()];
                let mut left = total;
                for (done, &o) in order.iter().enumerate() {
                    let fair = left / (order.len() - done) as f64;
                    let d = demand(&jobs[running[o]]);
                    share[o] = d.min(fair);
                    left -= share[o];
                }
                rates.extend(
                    running
                        .iter()
                        .zip(&share)
                        .map(|(&j, &b)| speed(jobs[j].compute, b, jobs[j].traffic)),
                );
            }
        }
        let (mut dt, mut first) = (f64::INFINITY, 0);
        for (i, (&j, &r)) in running.iter().zip(&rates).enumerate() {
            let t = if r.is_infinite() { 0.0 } else { remaining[j] / r };
            if t < dt {
                dt = t;
                first = i;
            }
        }
        now += dt;
        let mut finished = Vec::new();
        for (i, (&j, &r)) in running.iter().zip(&rates).enumerate() {
            if i == first || (!r.is_infinite() && remaining[j] - r * dt <= 1e-12) || r.is_infinite() {
                remaining[j] = 0.0;
                finished.push(i);
            } else {
                remaining[j] -= r * dt;
            }
        }
        for &i in finished.iter().rev() {
            let j = running.remove(i);
            times[j].1 = now;
            let c = jobs[j].cluster;
            head[c] += 1;
            if let Some(&nx) = queues[c].get(head[c]) {
                times[nx].0 = now;
                running.push(nx);
            }
        }
    }
    times
}

/// Fraction of a job completed per cycle given `bw` bytes per cycle.
fn speed(compute: f64, bw: f64, traffic: f64) -> f64 {
    let mem = if traffic == 0.0 { 0.0 } else { traffic / bw };
    let t = compute.max(mem);
    if t == 0.0 {
        f64::INFINITY
    } else {
        1.0 / t
    }
}

fn bytes_per_cycle(bw: Bandwidth, frequency: f64) -> Option<f64> {
    match bw {
        Bandwidth::Unlimited => None,
        Bandwidth::Limited(b) => Some(b / frequency),
    }
}

/// Greedy list scheduling of `queue` on `config`.
pub fn schedule_many(queue: &[KernelSpec], config: &AespaConfig, bw: Bandwidth) -> Result<ManyReport> {
    schedule_many_with(queue, config, bw, &config.model_params(false))
}

pub fn schedule_many_with(
    queue: &[KernelSpec],
    config: &AespaConfig,
    bw: Bandwidth,
    params: &ModelParams,
) -> Result<ManyReport> {
    if queue.is_empty() {
        return Err(Error::Workload("kernel queue is empty".into()));
    }
    if config.clusters.is_empty() {
        return Err(Error::Config(format!("`{}` has no clusters", config.name)));
    }
    let clusters = config.cluster_configs();
    let bpc = bytes_per_cycle(bw, config.frequency);
    let mut jobs: Vec<Job> = Vec::with_capacity(queue.len());
    let mut pairs = Vec::with_capacity(queue.len());
    for (qi, spec) in queue.iter().enumerate() {
        spec.validate()?;
        let mut best: Option<(f64, Job, CcfPair)> = None;
        for (ci, cl) in clusters.iter().enumerate() {
            let (pair, cost) = best_pair(cl, spec, bw, params);
            let job = Job {
                cluster: ci,
                compute: cost.compute_cycles as f64,
                traffic: cost.traffic_bytes as f64,
            };
            jobs.push(job);
            let end = simulate(&jobs, clusters.len(), bpc)[qi].1;
            jobs.pop();
            if best.as_ref().is_none_or(|b| end < b.0 - 1e-9) {
                best = Some((end, job, pair));
            }
        }
        let (_, job, pair) = best.expect("at least one cluster");
        jobs.push(job);
        pairs.push(pair);
    }
    let times = simulate(&jobs, clusters.len(), bpc);
    let placements: Vec<KernelPlacement> = queue
        .iter()
        .enumerate()
        .map(|(i, s)| KernelPlacement {
            kernel: s.id.clone(),
            queue_index: i,
            cluster: jobs[i].cluster,
            kind: clusters[jobs[i].cluster].kind,
            pair: pairs[i],
            start_cycle: ceil_cycles(times[i].0),
            end_cycle: ceil_cycles(times[i].1),
        })
        .collect();
    let total_cycles = placements.iter().map(|p| p.end_cycle).max().unwrap_or(0);
    Ok(ManyReport {
        config: config.name.clone(),
        placements,
        total_cycles,
    })
}

/// Cycles to run every kernel one after another on cluster `cluster`,
/// each with its best supported pair and the full bandwidth.
pub fn serial_cycles_on(
    queue: &[KernelSpec],
    config: &AespaConfig,
    cluster: usize,
    bw: Bandwidth,
) -> u64 {
    let cl = config.cluster(cluster);
    let params = config.model_params(false);
    queue
        .iter()
        .map(|s| best_pair(&cl, s, bw, &params).1.runtime_cycles)
        .sum()
}

/// Serial execution on the best single cluster of `config`.
pub fn serial_cycles(queue: &[KernelSpec], config: &AespaConfig, bw: Bandwidth) -> u64 {
    (0..config.clusters.len())
        .map(|c| serial_cycles_on(queue, config, c, bw))
        .min()
        .unwrap_or(0)
}

/// Serial execution on the best homogeneous preset of the same area.
pub fn serial_best_homogeneous(queue: &[KernelSpec], bw: Bandwidth) -> Result<(String, u64)> {
    let mut best: Option<(String, u64)> = None;
    for name in crate::archtemplate::HOMOGENEOUS_PRESETS {
        let cfg = crate::archtemplate::preset(name)?;
        let c = serial_cycles(queue, &cfg, bw);
        if best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((name.to_string(), c));
        }
    }
    Ok(best.expect("presets exist"))
}
