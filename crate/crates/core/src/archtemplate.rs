//! Heterogeneous accelerator configurations: area calibration, allocation
//! of the compute-area budget across cluster types, presets and the TOML
//! config file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::costmodel::{Bandwidth, ClusterConfig, DataflowKind, EnergyParams, ModelParams};
use crate::error::{Error, Result};

const DEFAULT_CALIBRATION: &str = include_str!("../data/calibration.toml");

pub const DEFAULT_HBM_BANDWIDTH: f64 = 1e12;
pub const DEFAULT_HBM_CAPACITY: u64 = 32_000_000_000;
pub const DEFAULT_SCRATCHPAD_CAPACITY: u64 = 64_000_000;
pub const DEFAULT_SCRATCHPAD_BANDWIDTH: f64 = 8.192e12;
pub const DEFAULT_FREQUENCY: f64 = 1e9;

/// Versioned calibration data for the area and energy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub compute_area_budget: f64,
    /// TPU-like PEs that exactly fill the budget.
    pub reference_pe_count: u64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    pub relative_area: BTreeMap<DataflowKind, f64>,
    #[serde(default)]
    pub energy: EnergyParams,
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY
}

impl Calibration {
    /// The calibration shipped with the crate.
    pub fn shipped() -> &'static Calibration {
        static CAL: OnceLock<Calibration> = OnceLock::new();
        CAL.get_or_init(|| Calibration::from_toml(DEFAULT_CALIBRATION).expect("shipped calibration"))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: Calibration = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.compute_area_budget.is_finite() && self.compute_area_budget > 0.0) || self.reference_pe_count == 0 {
            return Err(Error::Config("budget and reference PE count must be positive".into()));
        }
        if let Some((k, a)) = self.relative_area.iter().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Config(format!("relative area of {k} must be positive, got {a}")));
        }
        Ok(())
    }

    pub fn area_model(&self) -> AreaModel {
        let unit = self.compute_area_budget / self.reference_pe_count as f64;
        AreaModel {
            area_per_pe: self.relative_area.iter().map(|(k, r)| (*k, unit * r)).collect(),
            compute_area_budget: self.compute_area_budget,
        }
    }
}

/// mm² per PE for each kind, plus the compute-area budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaModel {
    pub area_per_pe: BTreeMap<DataflowKind, f64>,
    pub compute_area_budget: f64,
}

impl AreaModel {
    pub fn area(&self, kind: DataflowKind) -> Result<f64> {
        self.area_per_pe
            .get(&kind)
            .copied()
            .ok_or_else(|| Error::UnknownKind(kind.to_string()))
    }

    /// PEs of `kind` fitting in `fraction` of the budget.
    pub fn pes_for(&self, kind: DataflowKind, fraction: f64) -> Result<u64> {
        let q = fraction * self.compute_area_budget / self.area(kind)?;
        Ok((q + 1e-9).floor() as u64)
    }

    pub fn area_of(&self, clusters: &[ClusterConfig]) -> Result<f64> {
        clusters
            .iter()
            .map(|c| Ok(c.pe_count as f64 * self.area(c.kind)?))
            .sum()
    }
}

/// A cluster in a configuration; `area_fraction` is recorded when the
/// PE count was derived from an area share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub kind: DataflowKind,
    pub pe_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_fraction: Option<f64>,
}

/// A full heterogeneous accelerator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AespaConfig {
    pub name: String,
    /// Produced by a design-space search rather than a fixed ratio.
    #[serde(default)]
    pub searched: bool,
    pub hbm_bandwidth: f64,
    pub hbm_capacity: u64,
    pub scratchpad_capacity: u64,
    pub scratchpad_bandwidth: f64,
    pub frequency: f64,
    pub energy: EnergyParams,
    pub clusters: Vec<ClusterEntry>,
}

/// On-disk form: cluster PE counts may be omitted in favour of area
/// fractions, and memory constants default.
#[derive(Deserialize)]
struct ConfigFile {
    name: String,
    #[serde(default)]
    searched: bool,
    hbm_bandwidth: Option<f64>,
    hbm_capacity: Option<u64>,
    scratchpad_capacity: Option<u64>,
    scratchpad_bandwidth: Option<f64>,
    frequency: Option<f64>,
    energy: Option<EnergyParams>,
    clusters: Vec<ClusterFileEntry>,
}

#[derive(Deserialize)]
struct ClusterFileEntry {
    kind: DataflowKind,
    pe_count: Option<u64>,
    area_fraction: Option<f64>,
}

impl AespaConfig {
    fn with_defaults(name: String, clusters: Vec<ClusterEntry>, cal: &Calibration) -> Self {
        Self {
            name,
            searched: false,
            hbm_bandwidth: DEFAULT_HBM_BANDWIDTH,
            hbm_capacity: DEFAULT_HBM_CAPACITY,
            scratchpad_capacity: DEFAULT_SCRATCHPAD_CAPACITY,
            scratchpad_bandwidth: DEFAULT_SCRATCHPAD_BANDWIDTH,
            frequency: cal.frequency,
            energy: cal.energy,
            clusters,
        }
    }

    /// Explicit PE counts under the shipped calibration.
    pub fn from_pe_counts(name: impl Into<String>, clusters: &[(DataflowKind, u64)]) -> Result<Self> {
        let entries = clusters
            .iter()
            .map(|&(kind, pe_count)| ClusterEntry {
                kind,
                pe_count,
                area_fraction: None,
            })
            .collect();
        let c = Self::with_defaults(name.into(), entries, Calibration::shipped());
        if c.clusters.is_empty() || c.clusters.iter().any(|e| e.pe_count == 0) {
            return Err(Error::Config("every cluster needs at least one PE".into()));
        }
        Ok(c)
    }

    pub fn cluster(&self, i: usize) -> ClusterConfig {
        let e = &self.clusters[i];
        ClusterConfig {
            kind: e.kind,
            pe_count: e.pe_count,
            frequency: self.frequency,
        }
    }

    pub fn cluster_configs(&self) -> Vec<ClusterConfig> {
        (0..self.clusters.len()).map(|i| self.cluster(i)).collect()
    }

    pub fn total_pes(&self) -> u64 {
        self.clusters.iter().map(|c| c.pe_count).sum()
    }

    pub fn bandwidth(&self) -> Bandwidth {
        Bandwidth::Limited(self.hbm_bandwidth)
    }

    pub fn model_params(&self, charge_conversion: bool) -> ModelParams {
        ModelParams {
            energy: self.energy,
            refetch_factor: 1.0,
            charge_conversion,
            scratchpad_bandwidth: self.scratchpad_bandwidth,
        }
    }

    /// Checks PE counts, memory constants and area feasibility.
    pub fn validate(&self, area: &AreaModel) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::Config(format!("`{}` has no clusters", self.name)));
        }
        if self.clusters.iter().any(|c| c.pe_count == 0) {
            return Err(Error::Config(format!("`{}` has a cluster with zero PEs", self.name)));
        }
        for (what, v) in [
            ("hbm_bandwidth", self.hbm_bandwidth),
            ("scratchpad_bandwidth", self.scratchpad_bandwidth),
            ("frequency", self.frequency),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} must be positive, got {v}")));
            }
        }
        let used = area.area_of(&self.cluster_configs())?;
        if used > area.compute_area_budget * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "`{}` uses {used:.3} mm² of a {:.3} mm² budget",
                self.name, area.compute_area_budget
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Parses a config file, deriving missing PE counts from area
    /// fractions under `cal`.
    pub fn from_toml(s: &str, cal: &Calibration) -> Result<Self> {
        let f: ConfigFile = toml::from_str(s)?;
        let area = cal.area_model();
        let mut clusters = Vec::with_capacity(f.clusters.len());
        for c in f.clusters {
            let pe_count = match (c.pe_count, c.area_fraction) {
                (Some(p), _) => p,
                (None, Some(fr)) => area.pes_for(c.kind, fr)?,
                (None, None) => {
                    return Err(Error::Config(format!(
                        "cluster `{}` needs pe_count or area_fraction",
                        c.kind
                    )))
                }
            };
            clusters.push(ClusterEntry {
                kind: c.kind,
                pe_count,
                area_fraction: c.area_fraction,
            });
        }
        let mut cfg = Self::with_defaults(f.name, clusters, cal);
        cfg.searched = f.searched;
        cfg.hbm_bandwidth = f.hbm_bandwidth.unwrap_or(cfg.hbm_bandwidth);
        cfg.hbm_capacity = f.hbm_capacity.unwrap_or(cfg.hbm_capacity);
        cfg.scratchpad_capacity = f.scratchpad_capacity.unwrap_or(cfg.scratchpad_capacity);
        cfg.scratchpad_bandwidth = f.scratchpad_bandwidth.unwrap_or(cfg.scratchpad_bandwidth);
        cfg.frequency = f.frequency.unwrap_or(cfg.frequency);
        cfg.energy = f.energy.unwrap_or(cfg.energy);
        cfg.validate(&area)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, cal: &Calibration) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s, cal)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

/// Splits the compute budget by `mix` (kind, area fraction).
pub fn allocate(mix: &[(DataflowKind, f64)], area: &AreaModel) -> Result<AespaConfig> {
    allocate_with(mix, area, Calibration::shipped())
}

pub fn allocate_with(
    mix: &[(DataflowKind, f64)],
    area: &AreaModel,
    cal: &Calibration,
) -> Result<AespaConfig> {
    let total: f64 = mix.iter().map(|(_, f)| f).sum();
    if mix.iter().any(|(_, f)| !(f.is_finite() && *f >= 0.0)) || total > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "area fractions must be >= 0 and sum to <= 1, got {total}"
        )));
    }
    let mut clusters = Vec::new();
    for &(kind, fr) in mix {
        let pe_count = area.pes_for(kind, fr)?;
        if pe_count > 0 {
            clusters.push(ClusterEntry {
                kind,
                pe_count,
                area_fraction: Some(fr),
            });
        }
    }
    if clusters.is_empty() {
        return Err(Error::Config("allocation leaves no cluster with a PE".into()));
    }
    let name = mix
        .iter()
        .filter(|(_, f)| *f > 0.0)
        .map(|(k, f)| format!("{k}{f}"))
        .collect::<Vec<_>>()
        .join("-");
    let cfg = AespaConfig::with_defaults(format!("mix-{name}"), clusters, cal);
    cfg.validate(area)?;
    Ok(cfg)
}

/// Σ PEs × 2 flops × frequency, in TFLOPS/s.
pub fn peak_tflops(config: &AespaConfig) -> f64 {
    config.total_pes() as f64 * 2.0 * config.frequency / 1e12
}

pub const PRESET_NAMES: [&str; 10] = [
    "homog-tpu",
    "homog-eie",
    "homog-extensor",
    "homog-outerspace",
    "homog-matraptor",
    "homog-hybrid",
    "aespa-quarters",
    "aespa-half-tpu-outerspace",
    "aespa-half-tpu-eie",
    "aespa-searched",
];

/// Homogeneous preset names, one per kind.
pub const HOMOGENEOUS_PRESETS: [&str; 6] = [
    "homog-tpu",
    "homog-eie",
    "homog-extensor",
    "homog-outerspace",
    "homog-matraptor",
    "homog-hybrid",
];

/// Fixed-ratio mix of a static preset.
pub fn preset_mix(name: &str) -> Option<Vec<(DataflowKind, f64)>> {
    use DataflowKind::*;
    let mix = match name {
        "homog-tpu" => vec![(Tpu, 1.0)],
        "homog-eie" => vec![(Eie, 1.0)],
        "homog-extensor" => vec![(ExTensor, 1.0)],
        "homog-outerspace" => vec![(OuterSpace, 1.0)],
        "homog-matraptor" => vec![(MatRaptor, 1.0)],
        "homog-hybrid" => vec![(Hybrid, 1.0)],
        "aespa-quarters" => vec![(Tpu, 0.25), (Eie, 0.25), (ExTensor, 0.25), (OuterSpace, 0.25)],
        "aespa-half-tpu-outerspace" => vec![(Tpu, 0.5), (OuterSpace, 0.5)],
        "aespa-half-tpu-eie" => vec![(Tpu, 0.5), (Eie, 0.5)],
        _ => return None,
    };
    Some(mix)
}

/// A named preset under the shipped calibration. `aespa-searched` runs the
/// configuration search once per process and caches the result.
pub fn preset(name: &str) -> Result<AespaConfig> {
    if name == "aespa-searched" {
        static SEARCHED: OnceLock<AespaConfig> = OnceLock::new();
        return Ok(SEARCHED
            .get_or_init(|| {
                crate::scheduler::default_searched_config()
                    .expect("configuration search over the builtin suite")
            })
            .clone());
    }
    preset_with(name, Calibration::shipped())
}

/// A static preset under `cal`.
pub fn preset_with(name: &str, cal: &Calibration) -> Result<AespaConfig> {
    let mix = preset_mix(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let mut c = allocate_with(&mix, &cal.area_model(), cal)?;
    c.name = name.to_string();
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area() -> AreaModel {
        Calibration::shipped().area_model()
    }

    #[test]
    fn tpu_peak() {
        let c = preset("homog-tpu").unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].pe_count, 17280);
        assert!((peak_tflops(&c) - 34.56).abs() < 1e-9);
    }

    #[test]
    fn endpoints() {
        let h = preset("homog-hybrid").unwrap();
        assert!((peak_tflops(&h) - 8.96).abs() / 8.96 < 0.005);
        let x = preset("homog-extensor").unwrap();
        assert!((peak_tflops(&x) - 9.98).abs() / 9.98 < 0.005);
    }

    #[test]
    fn unit_cluster_peak() {
        let c = AespaConfig::from_pe_counts("one", &[(DataflowKind::Tpu, 1)]).unwrap();
        assert!((peak_tflops(&c) - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn empty_mix_errors() {
        assert!(allocate(&[], &area()).is_err());
        assert!(allocate(&[(DataflowKind::Tpu, 0.0)], &area()).is_err());
        assert!(allocate(&[(DataflowKind::Tpu, 0.7), (DataflowKind::Eie, 0.7)], &area()).is_err());
    }

    #[test]
    fn half_split_within_budget() {
        let a = area();
        let c = allocate(&[(DataflowKind::Tpu, 0.5), (DataflowKind::OuterSpace, 0.5)], &a).unwrap();
        let used: f64 = c
            .clusters
            .iter()
            .map(|e| e.pe_count as f64 * a.area_per_pe[&e.kind])
            .sum();
        assert!(used <= a.compute_area_budget);
        assert_eq!(c.clusters.len(), 2);
    }

    #[test]
    fn homogeneous_ordering() {
        let p = |n| peak_tflops(&preset(n).unwrap());
        assert!(p("homog-tpu") >= p("homog-eie"));
        assert!(p("homog-eie") >= p("homog-outerspace"));
        assert!(p("homog-eie") >= p("homog-matraptor"));
        assert!(p("homog-outerspace") >= p("homog-extensor"));
        assert!(p("homog-matraptor") >= p("homog-extensor"));
        assert!(p("homog-extensor") >= p("homog-hybrid"));
    }

    #[test]
    fn quarters_counts() {
        let c = preset("aespa-quarters").unwrap();
        let pes: Vec<u64> = c.clusters.iter().map(|e| e.pe_count).collect();
        assert_eq!(pes, vec![4320, 2700, 1247, 2160]);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("homog-gpu"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn toml_round_trip() {
        let c = preset("aespa-half-tpu-eie").unwrap();
        let s = c.to_toml().unwrap();
        let back = AespaConfig::from_toml(&s, Calibration::shipped()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn toml_area_fractions() {
        let s = r#"
name = "custom"
[[clusters]]
kind = "tpu"
area_fraction = 0.5
[[clusters]]
kind = "outerspace"
pe_count = 100
"#;
        let c = AespaConfig::from_toml(s, Calibration::shipped()).unwrap();
        assert_eq!(c.clusters[0].pe_count, 8640);
        assert_eq!(c.clusters[1].pe_count, 100);
        assert_eq!(c.hbm_bandwidth, 1e12);
        assert_eq!(c.scratchpad_capacity, DEFAULT_SCRATCHPAD_CAPACITY);
    }

    #[test]
    fn over_budget_rejected() {
        let s = "name = \"big\"\n[[clusters]]\nkind = \"tpu\"\npe_count = 20000\n";
        assert!(AespaConfig::from_toml(s, Calibration::shipped()).is_err());
    }
}
