//! Command-line front end.
//!
//! Every number written here comes straight from a library call; this
//! module only gathers inputs and formats rows.

pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::archtemplate::{
    peak_tflops, preset, preset_with, AespaConfig, Calibration, PRESET_NAMES,
};
use crate::costmodel::{best_pair, Bandwidth, DataflowKind};
use crate::error::{Error, Result};
use crate::kernel_spec::KernelSpec;
use crate::scheduler::{
    compare_baselines, schedule_many_with, search_config, search_with, serial_best_homogeneous, serial_cycles,
    Comparison, ConfigSearch, ManyReport, Objective, PartitionPlan, ScheduleReport, SearchOptions,
};
use crate::workloads;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug, Clone)]
#[command(name = "hetsparse", version, about = "Heterogeneous sparse accelerator modeling and scheduling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check every kernel and a split-and-merge plan against a dense triple loop.
    Verify {
        /// Number of random instances.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Largest M, K or N drawn.
        #[arg(long, default_value_t = 64)]
        max_extent: usize,
        /// JSON file `{"a": matrix, "b": matrix}` to check instead.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Roofline cost of each workload on each cluster of a configuration.
    Cost,
    /// Best single-kernel partition plan for each workload.
    Plan,
    /// Searched single-kernel results of several presets over a suite.
    Sweep {
        /// Preset the results are normalized to.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Assign a queue of whole kernels to clusters.
    ScheduleMany,
    /// Summarize presets; with --out DIR also write each as TOML.
    EmitPresets,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Accelerator configuration TOML.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Preset name; repeat for `sweep` and `emit-presets`.
    #[arg(long, global = true)]
    pub preset: Vec<String>,
    /// Ad-hoc PE counts, e.g. `tpu:2,eie:2`.
    #[arg(long, global = true)]
    pub clusters: Option<String>,
    /// Calibration TOML used instead of the shipped one.
    #[arg(long, global = true)]
    pub calibration: Option<PathBuf>,
    /// HBM bandwidth in bytes/s or `unlimited`; repeat for `sweep`.
    #[arg(long, global = true)]
    pub bandwidth: Vec<Bandwidth>,
    #[arg(long, global = true, default_value = "makespan")]
    pub objective: Objective,
    /// Output file (or directory for `emit-presets`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Charge format conversion through the scratchpad.
    #[arg(long, global = true)]
    pub charge_conversion: bool,
    /// Search cut points per dimension.
    #[arg(long, global = true, default_value_t = 8)]
    pub grid: usize,
    /// Builtin workload; repeat for several.
    #[arg(long, global = true)]
    pub workload: Vec<String>,
    /// JSON spec file `{"kernels": [...]}`.
    #[arg(long = "spec-file", visible_alias = "queue", global = true)]
    pub spec_file: Option<PathBuf>,
    /// MatrixMarket file; one gives `A·Aᵀ`, two give `A·B`.
    #[arg(long, global = true)]
    pub mtx: Vec<PathBuf>,
    /// Uniform random spec `M,K,N,D_A,D_B`.
    #[arg(long, global = true)]
    pub synth: Option<String>,
    /// The four-kernel demonstration queue.
    #[arg(long, global = true)]
    pub demo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    /// Named builtin workloads; empty means the whole suite.
    Builtin(Vec<String>),
    SpecFile(PathBuf),
    Mtx(Vec<PathBuf>),
    Synth {
        m: usize,
        k: usize,
        n: usize,
        d_a: f64,
        d_b: f64,
    },
    Demo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    Presets(Vec<String>),
    File(PathBuf),
    Clusters(Vec<(DataflowKind, u64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Many,
}

/// Validated inputs of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub config: ConfigSource,
    pub calibration: Option<PathBuf>,
    pub workload: WorkloadSource,
    /// Empty means the configuration's own bandwidth.
    pub bandwidths: Vec<Bandwidth>,
    pub mode: Mode,
    pub objective: Objective,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub charge_conversion: bool,
    pub grid: usize,
}

fn parse_synth(s: &str) -> Result<WorkloadSource> {
    let bad = || Error::Workload(format!("--synth expects M,K,N,D_A,D_B, got `{s}`"));
    let p: Vec<&str> = s.split(',').map(str::trim).collect();
    if p.len() != 5 {
        return Err(bad());
    }
    let dim = |x: &str| x.parse::<usize>().map_err(|_| bad());
    let den = |x: &str| x.parse::<f64>().map_err(|_| bad());
    Ok(WorkloadSource::Synth {
        m: dim(p[0])?,
        k: dim(p[1])?,
        n: dim(p[2])?,
        d_a: den(p[3])?,
        d_b: den(p[4])?,
    })
}

/// Parses `kind:pes,kind:pes`.
pub fn parse_clusters(s: &str) -> Result<Vec<(DataflowKind, u64)>> {
    s.split(',')
        .map(|part| {
            let (k, n) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("cluster `{part}` is not `kind:pes`")))?;
            let kind: DataflowKind = k.trim().parse()?;
            let pes = n
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad PE count in `{part}`")))?;
            Ok((kind, pes))
        })
        .collect()
}

impl RunConfig {
    pub fn from_common(
        c: &Common,
        mode: Mode,
        default_workload: WorkloadSource,
        default_config: ConfigSource,
        default_format: Format,
    ) -> Result<Self> {
        let mut sources = Vec::new();
        if !c.workload.is_empty() {
            sources.push(WorkloadSource::Builtin(c.workload.clone()));
        }
        if let Some(p) = &c.spec_file {
            sources.push(WorkloadSource::SpecFile(p.clone()));
        }
        if !c.mtx.is_empty() {
            sources.push(WorkloadSource::Mtx(c.mtx.clone()));
        }
        if let Some(s) = &c.synth {
            sources.push(parse_synth(s)?);
        }
        if c.demo {
            sources.push(WorkloadSource::Demo);
        }
        if sources.len() > 1 {
            return Err(Error::Workload(
                "give exactly one of --workload, --spec-file, --mtx, --synth, --demo".into(),
            ));
        }
        let workload = sources.pop().unwrap_or(default_workload);

        let mut configs = Vec::new();
        if !c.preset.is_empty() {
            configs.push(ConfigSource::Presets(c.preset.clone()));
        }
        if let Some(p) = &c.config {
            configs.push(ConfigSource::File(p.clone()));
        }
        if let Some(s) = &c.clusters {
            configs.push(ConfigSource::Clusters(parse_clusters(s)?));
        }
        if configs.len() > 1 {
            return Err(Error::Config("give only one of --preset, --config, --clusters".into()));
        }
        let config = configs.pop().unwrap_or(default_config);

        let rc = Self {
            config,
            calibration: c.calibration.clone(),
            workload,
            bandwidths: c.bandwidth.clone(),
            mode,
            objective: c.objective,
            out: c.out.clone(),
            format: c.format.unwrap_or(default_format),
            seed: c.seed,
            charge_conversion: c.charge_conversion,
            grid: c.grid,
        };
        rc.validate()?;
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Many && self.objective != Objective::Makespan {
            return Err(Error::Config("many-kernel scheduling only minimizes makespan".into()));
        }
        if self.grid == 0 {
            return Err(Error::Config("--grid must be at least 1".into()));
        }
        if let WorkloadSource::Mtx(p) = &self.workload {
            if p.len() > 2 {
                return Err(Error::Workload("--mtx takes one or two files".into()));
            }
        }
        Ok(())
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            objective: self.objective,
            grid: self.grid,
            charge_conversion: self.charge_conversion,
        }
    }

    fn calibration(&self) -> Result<Option<Calibration>> {
        self.calibration.as_deref().map(Calibration::load).transpose()
    }

    pub fn load_workloads(&self) -> Result<Vec<KernelSpec>> {
        let specs = match &self.workload {
            WorkloadSource::Builtin(names) if names.is_empty() => {
                workloads::builtin_suite().into_iter().map(|w| w.spec).collect()
            }
            WorkloadSource::Builtin(names) => names
                .iter()
                .map(|n| {
                    workloads::builtin(n)
                        .map(|w| w.spec)
                        .ok_or_else(|| Error::Workload(format!("unknown builtin workload `{n}`")))
                })
                .collect::<Result<_>>()?,
            WorkloadSource::SpecFile(p) => workloads::read_spec_file(p)?,
            WorkloadSource::Mtx(p) => match p.as_slice() {
                [a] => vec![workloads::mtx_gram_spec(a)?.spec],
                [a, b] => vec![workloads::mtx_pair_spec(a, b)?.spec],
                _ => return Err(Error::Workload("--mtx takes one or two files".into())),
            },
            &WorkloadSource::Synth { m, k, n, d_a, d_b } => {
                vec![workloads::synth_spec(m, k, n, d_a, d_b, self.seed, false)?.spec]
            }
            WorkloadSource::Demo => workloads::demo_queue(),
        };
        if specs.is_empty() {
            return Err(Error::Workload("no kernels to run".into()));
        }
        Ok(specs)
    }

    pub fn load_configs(&self) -> Result<Vec<AespaConfig>> {
        let cal = self.calibration()?;
        match &self.config {
            ConfigSource::Presets(names) => names.iter().map(|n| load_preset(n, cal.as_ref())).collect(),
            ConfigSource::File(p) => {
                let c = AespaConfig::load(p, cal.as_ref().unwrap_or(Calibration::shipped()))?;
                Ok(vec![c])
            }
            ConfigSource::Clusters(cl) => Ok(vec![AespaConfig::from_pe_counts("custom", cl)?]),
        }
    }

    pub fn load_config(&self) -> Result<AespaConfig> {
        let mut v = self.load_configs()?;
        if v.len() != 1 {
            return Err(Error::Config("this command takes a single configuration".into()));
        }
        Ok(v.remove(0))
    }

    fn bandwidths_or(&self, default: Bandwidth) -> Vec<Bandwidth> {
        if self.bandwidths.is_empty() {
            vec![default]
        } else {
            self.bandwidths.clone()
        }
    }
}

fn load_preset(name: &str, cal: Option<&Calibration>) -> Result<AespaConfig> {
    match cal {
        None => preset(name),
        Some(cal) if name == "aespa-searched" => {
            let suite: Vec<KernelSpec> = workloads::builtin_suite().into_iter().map(|w| w.spec).collect();
            let base = preset_with("homog-eie", cal)?;
            Ok(search_config(&suite, &base, &ConfigSearch::default(), cal)?.config)
        }
        Some(cal) => preset_with(name, cal),
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
}

fn json_text<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `out` with `-suffix` added to its file stem.
fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    out.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub workload: String,
    pub bandwidth: String,
    pub cluster: usize,
    pub kind: DataflowKind,
    pub pair: String,
    pub compute_cycles: u64,
    pub memory_cycles: u64,
    pub runtime: u64,
    pub utilization: f64,
    pub energy: f64,
    pub edp: f64,
}

pub fn cost_rows(rc: &RunConfig) -> Result<Vec<CostRow>> {
    let cfg = rc.load_config()?;
    let specs = rc.load_workloads()?;
    let params = cfg.model_params(rc.charge_conversion);
    let mut rows = Vec::new();
    for spec in &specs {
        spec.validate()?;
        for bw in rc.bandwidths_or(cfg.bandwidth()) {
            for (i, cl) in cfg.cluster_configs().iter().enumerate() {
                let (pair, c) = best_pair(cl, spec, bw, &params);
                rows.push(CostRow {
                    workload: spec.id.clone(),
                    bandwidth: bw.to_string(),
                    cluster: i,
                    kind: cl.kind,
                    pair: pair.to_string(),
                    compute_cycles: c.compute_cycles,
                    memory_cycles: c.memory_cycles,
                    runtime: c.runtime_cycles,
                    utilization: c.effective_utilization,
                    energy: c.energy,
                    edp: c.edp,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutput {
    pub workload: String,
    pub bandwidth: Bandwidth,
    pub plan: PartitionPlan,
    pub report: ScheduleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRow {
    pub workload: String,
    pub bandwidth: String,
    pub region: String,
    pub m_start: usize,
    pub m_end: usize,
    pub k_start: usize,
    pub k_end: usize,
    pub n_start: usize,
    pub n_end: usize,
    pub cluster: usize,
    pub kind: DataflowKind,
    pub pair: String,
    pub compute_cycles: u64,
    pub d_a: f64,
    pub d_b: f64,
    pub merge_cycles: u64,
    pub makespan_cycles: u64,
}

pub fn plan_outputs(rc: &RunConfig) -> Result<Vec<PlanOutput>> {
    let cfg = rc.load_config()?;
    let specs = rc.load_workloads()?;
    let opts = rc.search_options();
    let mut out = Vec::new();
    for spec in &specs {
        for bw in rc.bandwidths_or(cfg.bandwidth()) {
            let (plan, report) = search_with(spec, &cfg, bw, &opts)?;
            out.push(PlanOutput {
                workload: spec.id.clone(),
                bandwidth: bw,
                plan,
                report,
            });
        }
    }
    Ok(out)
}

fn plan_rows(outs: &[PlanOutput], cfg_kinds: &[DataflowKind]) -> Vec<PlanRow> {
    let mut rows = Vec::new();
    for o in outs {
        for (a, r) in o.plan.assignments.iter().zip(&o.report.regions) {
            rows.push(PlanRow {
                workload: o.workload.clone(),
                bandwidth: o.bandwidth.to_string(),
                region: serde_json::to_value(a.region.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                m_start: a.region.m.start,
                m_end: a.region.m.end,
                k_start: a.region.k.start,
                k_end: a.region.k.end,
                n_start: a.region.n.start,
                n_end: a.region.n.end,
                cluster: a.cluster,
                kind: cfg_kinds[a.cluster],
                pair: a.pair.to_string(),
                compute_cycles: r.compute_cycles,
                d_a: r.d_a,
                d_b: r.d_b,
                merge_cycles: o.report.merge_cycles,
                makespan_cycles: o.report.makespan_cycles,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub bandwidth: String,
    pub baseline: String,
    pub workload: String,
    pub preset: String,
    pub makespan_cycles: Option<u64>,
    pub speedup: f64,
    pub effective_utilization: f64,
    pub energy: Option<f64>,
    pub energy_improvement: f64,
    pub edp: Option<f64>,
    pub edp_improvement: f64,
}

/// Per-workload rows followed by one `geomean` row per preset.
pub fn sweep_rows(c: &Comparison) -> Vec<SweepRow> {
    let bw = c.bandwidth.to_string();
    let mut rows: Vec<SweepRow> = c
        .rows
        .iter()
        .map(|r| SweepRow {
            bandwidth: bw.clone(),
            baseline: c.baseline.clone(),
            workload: r.workload.clone(),
            preset: r.preset.clone(),
            makespan_cycles: Some(r.makespan_cycles),
            speedup: r.speedup,
            effective_utilization: r.effective_utilization,
            energy: Some(r.energy),
            energy_improvement: r.energy_improvement,
            edp: Some(r.edp),
            edp_improvement: r.edp_improvement,
        })
        .collect();
    rows.extend(c.geomean.iter().map(|g| SweepRow {
        bandwidth: bw.clone(),
        baseline: c.baseline.clone(),
        workload: "geomean".into(),
        preset: g.preset.clone(),
        makespan_cycles: None,
        speedup: g.speedup,
        effective_utilization: g.effective_utilization,
        energy: None,
        energy_improvement: g.energy_improvement,
        edp: None,
        edp_improvement: g.edp_improvement,
    }));
    rows
}

pub fn sweep(rc: &RunConfig, baseline: Option<&str>) -> Result<Vec<Comparison>> {
    let mut presets = rc.load_configs()?;
    let specs = rc.load_workloads()?;
    let base = match baseline {
        Some(b) => match presets.iter().position(|p| p.name == b) {
            Some(i) => i,
            None => {
                let cal = rc.calibration()?;
                presets.insert(0, load_preset(b, cal.as_ref())?);
                0
            }
        },
        None => presets.iter().position(|p| p.name == "homog-eie").unwrap_or(0),
    };
    let opts = rc.search_options();
    rc.bandwidths_or(Bandwidth::ONE_TB_S)
        .into_iter()
        .map(|bw| compare_baselines(&specs, &presets, base, bw, &opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyOutput {
    pub bandwidth: Bandwidth,
    pub schedule: ManyReport,
    /// All kernels back to back on the configuration's best single cluster.
    pub serial_cycles: u64,
    pub serial_best_homogeneous: String,
    pub serial_best_homogeneous_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyRow {
    pub bandwidth: String,
    pub kernel: String,
    pub queue_index: usize,
    pub cluster: usize,
    pub kind: DataflowKind,
    pub pair: String,
    pub start_cycle: u64,
    pub end_cycle: u64,
    pub total_cycles: u64,
}

pub fn schedule_many_outputs(rc: &RunConfig) -> Result<Vec<ManyOutput>> {
    let cfg = rc.load_config()?;
    let queue = rc.load_workloads()?;
    let params = cfg.model_params(rc.charge_conversion);
    rc.bandwidths_or(cfg.bandwidth())
        .into_iter()
        .map(|bw| {
            let schedule = schedule_many_with(&queue, &cfg, bw, &params)?;
            let (hname, hcycles) = serial_best_homogeneous(&queue, bw)?;
            Ok(ManyOutput {
                bandwidth: bw,
                schedule,
                serial_cycles: serial_cycles(&queue, &cfg, bw),
                serial_best_homogeneous: hname,
                serial_best_homogeneous_cycles: hcycles,
            })
        })
        .collect()
}

fn many_rows(outs: &[ManyOutput]) -> Vec<ManyRow> {
    outs.iter()
        .flat_map(|o| {
            o.schedule.placements.iter().map(move |p| ManyRow {
                bandwidth: o.bandwidth.to_string(),
                kernel: p.kernel.clone(),
                queue_index: p.queue_index,
                cluster: p.cluster,
                kind: p.kind,
                pair: p.pair.to_string(),
                start_cycle: p.start_cycle,
                end_cycle: p.end_cycle,
                total_cycles: o.schedule.total_cycles,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetRow {
    pub name: String,
    pub clusters: String,
    pub total_pes: u64,
    pub area_mm2: f64,
    pub peak_tflops: f64,
}

fn preset_rows(configs: &[AespaConfig], cal: &Calibration) -> Result<Vec<PresetRow>> {
    let area = cal.area_model();
    configs
        .iter()
        .map(|c| {
            Ok(PresetRow {
                name: c.name.clone(),
                clusters: c
                    .clusters
                    .iter()
                    .map(|e| format!("{}:{}", e.kind, e.pe_count))
                    .collect::<Vec<_>>()
                    .join(";"),
                total_pes: c.total_pes(),
                area_mm2: area.area_of(&c.cluster_configs())?,
                peak_tflops: peak_tflops(c),
            })
        })
        .collect()
}

fn table<T: Serialize>(rows: &[T], doc: &impl Serialize, format: Format) -> Result<String> {
    match format {
        Format::Csv => csv_text(rows),
        Format::Json => json_text(doc),
    }
}

/// Runs one command, writing its artifact to `stdout` and to `--out` when
/// given. Returns the process exit code; errors map to [`EXIT_INPUT`].
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let c = &cli.common;
    let quarters = || ConfigSource::Presets(vec!["aespa-quarters".into()]);
    let builtin = || WorkloadSource::Builtin(Vec::new());
    let text = match &cli.command {
        Command::Verify {
            seeds,
            max_extent,
            fixture,
        } => {
            let report = match fixture {
                Some(p) => verify::verify_fixture(p)?,
                None => verify::run_verify(*seeds, *max_extent, c.seed)?,
            };
            let text = table(&report.rows, &report, c.format.unwrap_or(Format::Csv))?;
            emit(stdout, &text, c.out.as_deref())?;
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            return Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION });
        }
        Command::Cost => {
            let rc = RunConfig::from_common(c, Mode::Single, builtin(), quarters(), Format::Csv)?;
            let rows = cost_rows(&rc)?;
            table(&rows, &rows, rc.format)?
        }
        Command::Plan => {
            let rc = RunConfig::from_common(c, Mode::Single, builtin(), quarters(), Format::Json)?;
            let outs = plan_outputs(&rc)?;
            let kinds: Vec<DataflowKind> = rc.load_config()?.clusters.iter().map(|e| e.kind).collect();
            table(&plan_rows(&outs, &kinds), &outs, rc.format)?
        }
        Command::Sweep { baseline } => {
            let all = ConfigSource::Presets(PRESET_NAMES.iter().map(|s| s.to_string()).collect());
            let rc = RunConfig::from_common(c, Mode::Single, builtin(), all, Format::Csv)?;
            let comps = sweep(&rc, baseline.as_deref())?;
            if let (Some(out), true) = (&rc.out, comps.len() > 1) {
                for cmp in &comps {
                    let t = table(&sweep_rows(cmp), cmp, rc.format)?;
                    write_file(&suffixed(out, &cmp.bandwidth.to_string()), &t)?;
                }
                let rows: Vec<SweepRow> = comps.iter().flat_map(sweep_rows).collect();
                let t = table(&rows, &comps, rc.format)?;
                stdout.write_all(t.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
                return Ok(EXIT_OK);
            }
            let rows: Vec<SweepRow> = comps.iter().flat_map(sweep_rows).collect();
            if comps.len() == 1 {
                table(&rows, &comps[0], rc.format)?
            } else {
                table(&rows, &comps, rc.format)?
            }
        }
        Command::ScheduleMany => {
            let rc = RunConfig::from_common(c, Mode::Many, WorkloadSource::Demo, quarters(), Format::Json)?;
            let outs = schedule_many_outputs(&rc)?;
            table(&many_rows(&outs), &outs, rc.format)?
        }
        Command::EmitPresets => {
            let all = ConfigSource::Presets(PRESET_NAMES.iter().map(|s| s.to_string()).collect());
            let rc = RunConfig::from_common(c, Mode::Single, builtin(), all, Format::Csv)?;
            let configs = rc.load_configs()?;
            let cal = rc.calibration()?;
            let rows = preset_rows(&configs, cal.as_ref().unwrap_or(Calibration::shipped()))?;
            if let Some(dir) = &rc.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for cfg in &configs {
                    cfg.save(&dir.join(format!("{}.toml", cfg.name)))?;
                }
            }
            let t = table(&rows, &rows, rc.format)?;
            stdout.write_all(t.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
            return Ok(EXIT_OK);
        }
    };
    emit(stdout, &text, c.out.as_deref())?;
    Ok(EXIT_OK)
}

fn emit(stdout: &mut dyn Write, text: &str, out: Option<&Path>) -> Result<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(p) = out {
        write_file(p, text)?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(args: &[&str]) -> (i32, String) {
        let cli = Cli::try_parse_from(std::iter::once("hetsparse").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        let code = execute(&cli, &mut buf).unwrap();
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn dense_cost_on_two_tpu_pes() {
        let (code, out) = run_to_string(&["cost", "--clusters", "tpu:2", "--synth", "4,4,4,1,1", "--bandwidth", "unlimited"]);
        assert_eq!(code, 0);
        let mut r = csv::Reader::from_reader(out.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), 1);
        let h = r.headers().unwrap().clone();
        let col = |name: &str| h.iter().position(|x| x == name).unwrap();
        assert_eq!(&rows[0][col("runtime")], "32");
        assert_eq!(&rows[0][col("memory_cycles")], "0");
    }

    #[test]
    fn csv_and_json_agree() {
        let (_, csv_out) = run_to_string(&["cost", "--workload", "journals"]);
        let (_, json_out) = run_to_string(&["cost", "--workload", "journals", "--format", "json"]);
        let rows: Vec<serde_json::Value> = serde_json::from_str(&json_out).unwrap();
        let mut r = csv::Reader::from_reader(csv_out.as_bytes());
        let recs: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), recs.len());
        let h = r.headers().unwrap().clone();
        for (j, rec) in rows.iter().zip(&recs) {
            for name in ["compute_cycles", "memory_cycles", "runtime", "utilization", "energy", "edp"] {
                let i = h.iter().position(|x| x == name).unwrap();
                let c: f64 = rec[i].parse().unwrap();
                assert_eq!(c, j[name].as_f64().unwrap(), "{name}");
            }
        }
    }

    #[test]
    fn two_workload_sources_rejected() {
        let cli = Cli::try_parse_from(["hetsparse", "cost", "--demo", "--workload", "journals"]).unwrap();
        assert!(execute(&cli, &mut Vec::new()).is_err());
    }

    #[test]
    fn edp_objective_rejected_for_many() {
        let cli = Cli::try_parse_from(["hetsparse", "schedule-many", "--objective", "edp"]).unwrap();
        assert!(matches!(execute(&cli, &mut Vec::new()), Err(Error::Config(_))));
    }

    #[test]
    fn single_preset_sweep_is_all_ones() {
        let (_, out) = run_to_string(&["sweep", "--preset", "homog-tpu", "--workload", "journals"]);
        let mut r = csv::Reader::from_reader(out.as_bytes());
        let h = r.headers().unwrap().clone();
        let i = h.iter().position(|x| x == "speedup").unwrap();
        for rec in r.records() {
            assert_eq!(&rec.unwrap()[i], "1.0");
        }
    }

    #[test]
    fn empty_queue_is_an_error() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), r#"{"kernels": []}"#).unwrap();
        let p = f.path().to_str().unwrap();
        let cli = Cli::try_parse_from(["hetsparse", "schedule-many", "--queue", p]).unwrap();
        assert!(execute(&cli, &mut Vec::new()).is_err());
    }

    #[test]
    fn suffix_keeps_extension() {
        assert_eq!(suffixed(Path::new("a/sweep.csv"), "unlimited"), Path::new("a/sweep-unlimited.csv"));
        assert_eq!(suffixed(Path::new("sweep"), "1e12"), Path::new("sweep-1e12"));
    }

    #[test]
    fn cluster_list() {
        let c = parse_clusters("tpu:2, eie:3").unwrap();
        assert_eq!(c, vec![(DataflowKind::Tpu, 2), (DataflowKind::Eie, 3)]);
        assert!(parse_clusters("tpu").is_err());
        assert!(parse_clusters("gpu:2").is_err());
    }
}
