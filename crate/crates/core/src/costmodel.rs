//! Analytical cost model for one cluster running one (sub-)kernel.
//!
//! Compute cycles come from the expected trip count of the kernel's loop
//! nest divided over the PEs the dataflow can occupy. Memory cycles come
//! from operand and output bytes at the available HBM bandwidth, and the
//! two combine as a roofline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{CcfDescriptor, Dim};
use crate::kernel_spec::KernelSpec;

/// Bytes per energy-accounted memory word.
pub const WORD_BYTES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataflowKind {
    Tpu,
    Eie,
    #[serde(rename = "extensor")]
    ExTensor,
    #[serde(rename = "outerspace")]
    OuterSpace,
    #[serde(rename = "matraptor")]
    MatRaptor,
    Hybrid,
}

impl DataflowKind {
    pub const ALL: [DataflowKind; 6] = [
        DataflowKind::Tpu,
        DataflowKind::Eie,
        DataflowKind::ExTensor,
        DataflowKind::OuterSpace,
        DataflowKind::MatRaptor,
        DataflowKind::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataflowKind::Tpu => "tpu",
            DataflowKind::Eie => "eie",
            DataflowKind::ExTensor => "extensor",
            DataflowKind::OuterSpace => "outerspace",
            DataflowKind::MatRaptor => "matraptor",
            DataflowKind::Hybrid => "hybrid",
        }
    }

    pub fn supports(self, pair: CcfPair) -> bool {
        supported_ccfs(self).contains(&pair)
    }
}

impl fmt::Display for DataflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataflowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DataflowKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// The formats A and B are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CcfPair {
    pub a: CcfDescriptor,
    pub b: CcfDescriptor,
}

impl CcfPair {
    /// `U_M U_K, U_K U_N`
    pub const DENSE: CcfPair = CcfPair::new(
        CcfDescriptor::dense(Dim::M, Dim::K),
        CcfDescriptor::dense(Dim::K, Dim::N),
    );
    /// `U_M C_K, U_K U_N`
    pub const SPARSE_A: CcfPair = CcfPair::new(
        CcfDescriptor::compressed(Dim::M, Dim::K),
        CcfDescriptor::dense(Dim::K, Dim::N),
    );
    /// `U_M U_K, U_N C_K`
    pub const SPARSE_B: CcfPair = CcfPair::new(
        CcfDescriptor::dense(Dim::M, Dim::K),
        CcfDescriptor::compressed(Dim::N, Dim::K),
    );
    /// `U_M C_K, U_N C_K`
    pub const INNER: CcfPair = CcfPair::new(
        CcfDescriptor::compressed(Dim::M, Dim::K),
        CcfDescriptor::compressed(Dim::N, Dim::K),
    );
    /// `U_K C_M, U_K C_N`
    pub const OUTER: CcfPair = CcfPair::new(
        CcfDescriptor::compressed(Dim::K, Dim::M),
        CcfDescriptor::compressed(Dim::K, Dim::N),
    );
    /// `U_K C_M, U_N C_K`
    pub const GUSTAVSON: CcfPair = CcfPair::new(
        CcfDescriptor::compressed(Dim::K, Dim::M),
        CcfDescriptor::compressed(Dim::N, Dim::K),
    );

    pub const fn new(a: CcfDescriptor, b: CcfDescriptor) -> Self {
        Self { a, b }
    }

    /// Extent of the dimension that caps usable PEs.
    pub fn parallel_bound(self, m: usize, k: usize, n: usize) -> u64 {
        let (m, k, n) = (m as u64, k as u64, n as u64);
        match self {
            CcfPair::DENSE => m * n,
            CcfPair::SPARSE_A => m,
            CcfPair::SPARSE_B => n,
            CcfPair::INNER => m.max(n),
            CcfPair::OUTER => k,
            CcfPair::GUSTAVSON => n,
            // any other arrangement parallelizes over its outer output dims
            _ => m * n,
        }
    }
}

impl fmt::Display for CcfPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

pub fn supported_ccfs(kind: DataflowKind) -> &'static [CcfPair] {
    match kind {
        DataflowKind::Tpu => &[CcfPair::DENSE],
        DataflowKind::Eie => &[CcfPair::SPARSE_A, CcfPair::SPARSE_B],
        DataflowKind::ExTensor => &[CcfPair::INNER],
        DataflowKind::OuterSpace => &[CcfPair::OUTER],
        DataflowKind::MatRaptor => &[CcfPair::GUSTAVSON],
        DataflowKind::Hybrid => &[
            CcfPair::DENSE,
            CcfPair::SPARSE_A,
            CcfPair::SPARSE_B,
            CcfPair::INNER,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub kind: DataflowKind,
    pub pe_count: u64,
    /// Cycles per second.
    #[serde(default = "default_frequency")]
    pub frequency: f64,
}

fn default_frequency() -> f64 {
    1e9
}

impl ClusterConfig {
    pub fn new(kind: DataflowKind, pe_count: u64) -> Self {
        Self {
            kind,
            pe_count,
            frequency: default_frequency(),
        }
    }
}

/// HBM bandwidth in bytes per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Bandwidth {
    Limited(f64),
    Unlimited,
}

impl Bandwidth {
    pub const ONE_TB_S: Bandwidth = Bandwidth::Limited(1e12);

    /// Cycles to move `bytes` at this bandwidth and `frequency`.
    pub fn cycles(self, bytes: f64, frequency: f64) -> u64 {
        match self {
            Bandwidth::Unlimited => 0,
            Bandwidth::Limited(bw) => ceil_cycles(bytes * frequency / bw),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("unlimited") || t.eq_ignore_ascii_case("inf") {
            return Ok(Bandwidth::Unlimited);
        }
        match t.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Limited(v)),
            _ => Err(Error::Config(format!(
                "bandwidth must be a positive number of bytes/s or `unlimited`, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Unlimited => f.write_str("unlimited"),
            Bandwidth::Limited(v) => write!(f, "{v:e}"),
        }
    }
}

impl TryFrom<String> for Bandwidth {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Bandwidth> for String {
    fn from(b: Bandwidth) -> String {
        b.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub e_mac: f64,
    pub e_sram_word: f64,
    pub e_hbm_word: f64,
    pub e_idle_pe_cycle: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_mac: 1.0,
            e_sram_word: 10.0,
            e_hbm_word: 6400.0,
            e_idle_pe_cycle: 0.05,
        }
    }
}

/// Knobs of the model beyond the hardware description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub energy: EnergyParams,
    /// Multiplier on operand bytes fetched from HBM.
    pub refetch_factor: f64,
    /// Charge format conversion when a cluster computes in a format other
    /// than the delivered one.
    pub charge_conversion: bool,
    /// Bytes per second through the converters' scratchpad path.
    pub scratchpad_bandwidth: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            energy: EnergyParams::default(),
            refetch_factor: 1.0,
            charge_conversion: false,
            scratchpad_bandwidth: 8.192e12,
        }
    }
}

/// Rounds a non-negative cycle estimate up, treating values within
/// floating-point noise of an integer as that integer.
pub fn ceil_cycles(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Estimated bytes of one operand block.
pub fn operand_bytes(
    rows: usize,
    cols: usize,
    density: f64,
    ccf: CcfDescriptor,
    outer_extent: usize,
    value_bytes: u64,
    index_bytes: u64,
) -> u64 {
    if ccf.is_compressed() {
        let nnz = (rows as f64 * cols as f64 * density).round() as u64;
        nnz * (value_bytes + index_bytes) + (outer_extent as u64 + 1) * index_bytes
    } else {
        rows as u64 * cols as u64 * value_bytes
    }
}

fn outer_extent(ccf: CcfDescriptor, m: usize, k: usize, n: usize) -> usize {
    match ccf.outer_dim {
        Dim::M => m,
        Dim::K => k,
        Dim::N => n,
    }
}

/// Bytes of A and B of `spec` when stored in `pair`.
pub fn pair_operand_bytes(spec: &KernelSpec, pair: CcfPair) -> (u64, u64) {
    let (m, k, n) = (spec.m, spec.k, spec.n);
    let a = operand_bytes(
        m,
        k,
        spec.d_a,
        pair.a,
        outer_extent(pair.a, m, k, n),
        spec.value_bytes,
        spec.index_bytes,
    );
    let b = operand_bytes(
        k,
        n,
        spec.d_b,
        pair.b,
        outer_extent(pair.b, m, k, n),
        spec.value_bytes,
        spec.index_bytes,
    );
    (a, b)
}

pub fn output_bytes(spec: &KernelSpec) -> u64 {
    spec.m as u64 * spec.n as u64 * spec.value_bytes
}

fn delivered_pair(spec: &KernelSpec) -> CcfPair {
    CcfPair::new(spec.ccf_a, spec.ccf_b)
}

/// Expected innermost iterations of `pair`'s loop nest on `spec`.
pub fn iterations(spec: &KernelSpec, pair: CcfPair) -> f64 {
    let mut it = spec.volume();
    if pair.a.is_compressed() {
        it *= spec.d_a;
    }
    if pair.b.is_compressed() {
        it *= spec.d_b;
    }
    it
}

fn check_pair(cluster: &ClusterConfig, pair: CcfPair) -> Result<()> {
    if cluster.kind.supports(pair) {
        Ok(())
    } else {
        Err(Error::UnsupportedPair {
            kind: cluster.kind,
            pair,
        })
    }
}

pub fn usable_pes_for(cluster: &ClusterConfig, spec: &KernelSpec, pair: CcfPair) -> Result<u64> {
    check_pair(cluster, pair)?;
    Ok(cluster.pe_count.min(pair.parallel_bound(spec.m, spec.k, spec.n)))
}

/// PEs the cluster can occupy on `spec` in its delivered formats.
pub fn usable_pes(cluster: &ClusterConfig, spec: &KernelSpec) -> Result<u64> {
    usable_pes_for(cluster, spec, delivered_pair(spec))
}

pub fn compute_cycles_for(cluster: &ClusterConfig, spec: &KernelSpec, pair: CcfPair) -> Result<u64> {
    let usable = usable_pes_for(cluster, spec, pair)?;
    Ok(ceil_cycles(iterations(spec, pair) / usable.max(1) as f64))
}

/// Compute-bound cycles of `spec` in its delivered formats.
pub fn compute_cycles(cluster: &ClusterConfig, spec: &KernelSpec) -> Result<u64> {
    compute_cycles_for(cluster, spec, delivered_pair(spec))
}

/// HBM bytes for `spec` in its delivered formats with a single fetch.
pub fn traffic_bytes(spec: &KernelSpec) -> u64 {
    traffic_bytes_with(spec, &ModelParams::default())
}

pub fn traffic_bytes_with(spec: &KernelSpec, params: &ModelParams) -> u64 {
    let (a, b) = pair_operand_bytes(spec, delivered_pair(spec));
    refetched(a + b, params) + output_bytes(spec)
}

fn refetched(bytes: u64, params: &ModelParams) -> u64 {
    if params.refetch_factor == 1.0 {
        bytes
    } else {
        (bytes as f64 * params.refetch_factor).ceil() as u64
    }
}

/// Inputs to the energy sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyInputs {
    pub macs: f64,
    pub hbm_words: f64,
    pub sram_words: f64,
    pub idle_pe_cycles: f64,
}

pub fn energy(inputs: &EnergyInputs, params: &EnergyParams) -> f64 {
    inputs.macs * params.e_mac
        + inputs.hbm_words * params.e_hbm_word
        + inputs.sram_words * params.e_sram_word
        + inputs.idle_pe_cycles * params.e_idle_pe_cycle
}

/// Energy × seconds.
pub fn edp(energy: f64, cycles: u64, frequency: f64) -> f64 {
    energy * cycles as f64 / frequency
}

/// Cost of one region computed in a given pair, before bandwidth is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCost {
    pub compute_cycles: u64,
    /// Iterations the cluster executes (dense engines execute zeros too).
    pub performed_macs: f64,
    /// Nonzero products.
    pub effectual_macs: f64,
    /// HBM bytes of A and B as they travel from memory.
    pub a_bytes: u64,
    pub b_bytes: u64,
    pub out_bytes: u64,
    /// Scratchpad bytes read and written by format converters.
    pub conversion_bytes: u64,
}

impl RegionCost {
    pub fn traffic(&self) -> u64 {
        self.a_bytes + self.b_bytes + self.out_bytes
    }
}

/// Costs `spec` on `cluster` when computed in `pair`. Operands arrive in
/// `pair` unless conversion is charged, in which case they arrive in the
/// delivered formats and pass through a converter.
pub fn region_cost(
    cluster: &ClusterConfig,
    spec: &KernelSpec,
    pair: CcfPair,
    params: &ModelParams,
) -> Result<RegionCost> {
    let mut compute = compute_cycles_for(cluster, spec, pair)?;
    let (ta, tb) = pair_operand_bytes(spec, pair);
    let (mut a_bytes, mut b_bytes, mut conv) = (ta, tb, 0);
    if params.charge_conversion {
        let (da, db) = pair_operand_bytes(spec, delivered_pair(spec));
        if pair.a != spec.ccf_a {
            a_bytes = da;
            conv += da + ta;
        }
        if pair.b != spec.ccf_b {
            b_bytes = db;
            conv += db + tb;
        }
        if conv > 0 {
            compute += ceil_cycles(conv as f64 * cluster.frequency / params.scratchpad_bandwidth);
        }
    }
    Ok(RegionCost {
        compute_cycles: compute,
        performed_macs: iterations(spec, pair),
        effectual_macs: spec.effectual_macs(),
        a_bytes: refetched(a_bytes, params),
        b_bytes: refetched(b_bytes, params),
        out_bytes: output_bytes(spec),
        conversion_bytes: conv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub compute_cycles: u64,
    pub memory_cycles: u64,
    pub runtime_cycles: u64,
    pub traffic_bytes: u64,
    pub effectual_macs: f64,
    pub performed_macs: f64,
    pub idle_pe_cycles: f64,
    pub effective_utilization: f64,
    pub energy: f64,
    pub edp: f64,
}

impl CostBreakdown {
    /// An idle cluster over `cycles`.
    pub fn idle(cluster: &ClusterConfig, cycles: u64, params: &EnergyParams) -> Self {
        let idle = cluster.pe_count as f64 * cycles as f64;
        let e = idle * params.e_idle_pe_cycle;
        Self {
            compute_cycles: 0,
            memory_cycles: 0,
            runtime_cycles: 0,
            traffic_bytes: 0,
            effectual_macs: 0.0,
            performed_macs: 0.0,
            idle_pe_cycles: idle,
            effective_utilization: 0.0,
            energy: e,
            edp: edp(e, cycles, cluster.frequency),
        }
    }
}

/// Assembles a breakdown for a cluster whose busy window is `runtime` out
/// of a `window`-cycle accounting period.
#[allow(clippy::too_many_arguments)]
pub fn breakdown(
    cluster: &ClusterConfig,
    compute_cycles: u64,
    memory_cycles: u64,
    traffic_bytes: u64,
    sram_bytes: u64,
    performed_macs: f64,
    effectual_macs: f64,
    window: u64,
    params: &EnergyParams,
) -> CostBreakdown {
    let runtime = compute_cycles.max(memory_cycles);
    let window = window.max(runtime);
    let idle = (cluster.pe_count as f64 * window as f64 - performed_macs).max(0.0);
    let inputs = EnergyInputs {
        macs: performed_macs,
        hbm_words: traffic_bytes as f64 / WORD_BYTES,
        sram_words: sram_bytes as f64 / WORD_BYTES,
        idle_pe_cycles: idle,
    };
    let e = energy(&inputs, params);
    let util = if runtime == 0 {
        0.0
    } else {
        (effectual_macs / (cluster.pe_count as f64 * runtime as f64)).min(1.0)
    };
    CostBreakdown {
        compute_cycles,
        memory_cycles,
        runtime_cycles: runtime,
        traffic_bytes,
        effectual_macs,
        performed_macs,
        idle_pe_cycles: idle,
        effective_utilization: util,
        energy: e,
        edp: edp(e, window, cluster.frequency),
    }
}

/// Roofline cost of `spec` alone on `cluster`, computed in `pair`.
pub fn runtime_for(
    cluster: &ClusterConfig,
    spec: &KernelSpec,
    pair: CcfPair,
    bw: Bandwidth,
    params: &ModelParams,
) -> Result<CostBreakdown> {
    let r = region_cost(cluster, spec, pair, params)?;
    let traffic = r.traffic();
    let memory = bw.cycles(traffic as f64, cluster.frequency);
    // every HBM byte is written into and read out of the scratchpad once
    let sram = 2 * traffic + r.conversion_bytes;
    Ok(breakdown(
        cluster,
        r.compute_cycles,
        memory,
        traffic,
        sram,
        r.performed_macs,
        r.effectual_macs,
        0,
        &params.energy,
    ))
}

/// Roofline cost of `spec` on `cluster` in its delivered formats.
pub fn runtime(cluster: &ClusterConfig, spec: &KernelSpec, bw: Bandwidth) -> Result<CostBreakdown> {
    runtime_for(cluster, spec, delivered_pair(spec), bw, &ModelParams::default())
}

/// The supported pair with the lowest runtime (first wins ties).
pub fn best_pair(
    cluster: &ClusterConfig,
    spec: &KernelSpec,
    bw: Bandwidth,
    params: &ModelParams,
) -> (CcfPair, CostBreakdown) {
    let mut best: Option<(CcfPair, CostBreakdown)> = None;
    for &p in supported_ccfs(cluster.kind) {
        let c = runtime_for(cluster, spec, p, bw, params).expect("supported pair");
        if best.as_ref().is_none_or(|(_, b)| c.runtime_cycles < b.runtime_cycles) {
            best = Some((p, c));
        }
    }
    best.expect("every kind supports a pair")
}
