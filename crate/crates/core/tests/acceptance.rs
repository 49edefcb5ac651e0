//! Acceptance gate: one PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hetsparse::archtemplate::{peak_tflops, preset, AespaConfig, HOMOGENEOUS_PRESETS, PRESET_NAMES};
use hetsparse::cli::{execute, Cli};
use hetsparse::costmodel::{usable_pes_for, Bandwidth, CcfPair, ClusterConfig, DataflowKind, DataflowKind::*};
use hetsparse::formats::{compress, convert, decompress, gen_uniform_random, parse_ccf, Role, StoredMatrix};
use hetsparse::kernels::{
    run_dense_gemm, run_spgemm_gustavson, run_spgemm_inner, run_spgemm_outer, run_spmm_eie, KernelResult,
};
use hetsparse::scheduler::{
    compare_baselines, evaluate_plan, execute_plan, schedule_many, search_single_kernel, serial_best_homogeneous,
    Objective, PartitionPlan, RegionKind, SearchOptions,
};
use hetsparse::workloads::{builtin, builtin_suite, demo_queue};
use hetsparse::KernelSpec;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
// name, (m0, n0, k0), per-cluster compute, merge, makespan
type SplitCase = (&'static str, (usize, usize, usize), [u64; 4], u64, u64);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(t < limit, || format!("{what} took {t:?}, limit {limit:?}"))
}

fn dense_product(a: &StoredMatrix, b: &StoredMatrix) -> Vec<f64> {
    let (ag, bg) = (a.to_row_major(), b.to_row_major());
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += ag[i * k + p] * bg[p * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

fn four_cluster_machine() -> AespaConfig {
    AespaConfig::from_pe_counts("split-example", &[(Tpu, 2), (Eie, 2), (ExTensor, 2), (OuterSpace, 2)]).unwrap()
}

fn place_by_region(rk: RegionKind) -> (usize, CcfPair) {
    match rk {
        RegionKind::DenseDense => (0, CcfPair::DENSE),
        RegionKind::SparseDense => (1, CcfPair::SPARSE_A),
        RegionKind::DenseSparse => (1, CcfPair::SPARSE_B),
        RegionKind::SparseSparse => (2, CcfPair::INNER),
        RegionKind::KTail => (3, CcfPair::OUTER),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = four_cluster_machine();
    let spec = KernelSpec::new("split-example", 4, 4, 4, 0.25, 0.25);
    // clusters are [tpu, eie, extensor, outerspace]
    let cases: [SplitCase; 5] = [
        ("a", (4, 4, 4), [32, 0, 0, 0], 0, 32),
        ("b", (2, 4, 4), [16, 4, 0, 0], 0, 16),
        ("c", (2, 2, 4), [8, 4, 1, 0], 0, 8),
        ("d", (4, 4, 2), [16, 0, 0, 1], 2, 18),
        ("e", (2, 2, 2), [4, 2, 1, 1], 2, 6),
    ];
    let mut detail = Vec::new();
    for (name, (m0, n0, k0), want, merge, makespan) in cases {
        let plan = PartitionPlan::from_template(&spec, m0, n0, k0, place_by_region);
        let r = evaluate_plan(&plan, &spec, &cfg, Bandwidth::Unlimited).map_err(|e| e.to_string())?;
        let got: Vec<u64> = (0..4).map(|c| r.cluster_compute(c)).collect();
        ensure(got == want, || format!("({name}) per-cluster cycles {got:?}, expected {want:?}"))?;
        ensure(r.merge_cycles == merge && r.makespan_cycles == makespan, || {
            format!("({name}) merge {} makespan {}", r.merge_cycles, r.makespan_cycles)
        })?;
        if name == "c" {
            let eie: Vec<u64> = r.regions.iter().filter(|x| x.cluster == 1).map(|x| x.compute_cycles).collect();
            ensure(eie == [2, 2], || format!("(c) EIE regions {eie:?}, expected 2+2"))?;
        }
        detail.push(format!("{name}={got:?}"));
    }
    within(start.elapsed(), Duration::from_secs(1), "criterion 1")?;
    Ok(detail.join(" "))
}

type KernelFn = fn(&StoredMatrix, &StoredMatrix) -> hetsparse::Result<KernelResult>;

const KERNELS: [(&str, CcfPair, KernelFn); 6] = [
    ("dense", CcfPair::DENSE, run_dense_gemm),
    ("eie-a", CcfPair::SPARSE_A, run_spmm_eie),
    ("eie-b", CcfPair::SPARSE_B, run_spmm_eie),
    ("inner", CcfPair::INNER, run_spgemm_inner),
    ("outer", CcfPair::OUTER, run_spgemm_outer),
    ("gustavson", CcfPair::GUSTAVSON, run_spgemm_gustavson),
];

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let densities = [0.01, 0.1, 0.5, 1.0];
    let cfg = four_cluster_machine();
    let instances = 120u64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ seed);
        let (m, k, n) = (rng.gen_range(1..=64), rng.gen_range(1..=64), rng.gen_range(1..=64));
        let (da, db) = (densities[(seed % 4) as usize], densities[rng.gen_range(0..4)]);
        let a = gen_uniform_random(Role::A, m, k, da, 1000 + seed).unwrap();
        let b = gen_uniform_random(Role::B, k, n, db, 5000 + seed).unwrap();
        let want = dense_product(&a, &b);
        for (name, pair, f) in KERNELS {
            let r = f(&compress(&a, pair.a).unwrap(), &compress(&b, pair.b).unwrap()).map_err(|e| e.to_string())?;
            ensure(r.output.dense_values() == want.as_slice(), || {
                format!("{name} differs on seed {seed} ({m}x{k}x{n}, {da}, {db})")
            })?;
        }
        let spec = KernelSpec::new("split", m, k, n, da, db).with_operands(a, b).unwrap();
        let mut cut = |e: usize| rng.gen_range(0..=e);
        let (m0, n0, k0) = (cut(m), cut(n), cut(k));
        let plan = PartitionPlan::from_template(&spec, m0, n0, k0, place_by_region);
        let (out, _) = execute_plan(&plan, &spec, &cfg).map_err(|e| e.to_string())?;
        ensure(out.dense_values() == want.as_slice(), || {
            format!("split ({m0},{n0},{k0}) differs on seed {seed}")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(30), "criterion 2")?;
    Ok(format!("{instances} instances x 6 kernels + split/merge, exact"))
}

fn criterion_3() -> Outcome {
    // (label, pair, kernel, d_a, d_b); analytic macs scale by the
    // density of each compressed operand
    let (m, k, n) = (48usize, 64usize, 40usize);
    assert!(m * k * n >= 100_000);
    let cases: [(&str, CcfPair, KernelFn, f64, f64); 5] = [
        ("eie (A sparse)", CcfPair::SPARSE_A, run_spmm_eie, 0.1, 1.0),
        ("eie (B sparse)", CcfPair::SPARSE_B, run_spmm_eie, 1.0, 0.2),
        ("extensor", CcfPair::INNER, run_spgemm_inner, 0.2, 0.3),
        ("outerspace", CcfPair::OUTER, run_spgemm_outer, 0.2, 0.3),
        ("matraptor", CcfPair::GUSTAVSON, run_spgemm_gustavson, 0.1, 0.4),
    ];
    let mut detail = Vec::new();
    for (label, pair, f, da, db) in cases {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let a = gen_uniform_random(Role::A, m, k, da, 7 * seed + 1).unwrap();
            let b = gen_uniform_random(Role::B, k, n, db, 7 * seed + 2).unwrap();
            let r = f(&compress(&a, pair.a).unwrap(), &compress(&b, pair.b).unwrap()).unwrap();
            total += r.counters.macs as f64;
        }
        let mean = total / 20.0;
        let analytic = (m * k * n) as f64 * da * db;
        let err = (mean - analytic).abs() / analytic;
        ensure(err <= 0.05, || format!("{label}: mean {mean} vs {analytic} ({:.2}%)", err * 100.0))?;
        detail.push(format!("{label} {:.2}%", err * 100.0));
    }
    Ok(detail.join(", "))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let tags_a = ["UMUK", "UKUM", "UMCK", "UKCM"];
    let tags_b = ["UKUN", "UNUK", "UNCK", "UKCN"];
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for i in 0..1000u64 {
        let role = if i % 2 == 0 { Role::A } else { Role::B };
        let (r, c) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let d = [0.01, 0.05, 0.2, 0.6, 1.0][rng.gen_range(0..5)];
        let m = gen_uniform_random(role, r, c, d, i).unwrap();
        let grid = m.to_row_major();
        let tags = if role == Role::A { tags_a } else { tags_b };
        for t in tags {
            let s = compress(&m, parse_ccf(t).unwrap()).unwrap();
            let back = decompress(&s).unwrap();
            ensure(back.to_row_major() == grid, || format!("{t} round trip failed on matrix {i}"))?;
        }
        let (csr, csc) = (parse_ccf(tags[2]).unwrap(), parse_ccf(tags[3]).unwrap());
        let x = compress(&m, csr).unwrap();
        let y = convert(&convert(&x, csc).unwrap(), csr).unwrap();
        ensure(y == x, || format!("CSR->CSC->CSR differs on matrix {i}"))?;
        let z = convert(&convert(&y, csc).unwrap(), csr).unwrap();
        ensure(z == x, || format!("second CSR->CSC->CSR differs on matrix {i}"))?;
    }
    within(start.elapsed(), Duration::from_secs(10), "criterion 4")?;
    Ok("1000 matrices, bit-exact".into())
}

fn criterion_5() -> Outcome {
    let close = |x: f64, want: f64| (x - want).abs() <= want * 0.005;
    let tpu = peak_tflops(&preset("homog-tpu").unwrap());
    let single: Vec<(&str, f64)> = HOMOGENEOUS_PRESETS
        .iter()
        .filter(|n| **n != "homog-hybrid")
        .map(|n| (*n, peak_tflops(&preset(n).unwrap())))
        .collect();
    let (low_name, low) = single
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let hybrid = peak_tflops(&preset("homog-hybrid").unwrap());
    ensure(close(tpu, 34.56), || format!("homog-tpu {tpu}"))?;
    ensure(close(low, 9.98), || format!("lowest {low_name} {low}"))?;
    ensure(close(hybrid, 8.96), || format!("homog-hybrid {hybrid}"))?;
    Ok(format!("tpu {tpu:.3}, {low_name} {low:.3}, hybrid {hybrid:.3}"))
}

fn criterion_6() -> Outcome {
    let t = builtin("transformer").unwrap().spec;
    for pes in [85u64, 8640, 1_000_000] {
        let c = ClusterConfig::new(OuterSpace, pes);
        let u = usable_pes_for(&c, &t, CcfPair::OUTER).unwrap();
        ensure(u == 84, || format!("{pes} configured PEs give {u} usable"))?;
    }
    let osp = preset("homog-outerspace").unwrap();
    let u = usable_pes_for(&osp.cluster(0), &t, CcfPair::OUTER).unwrap();
    ensure(u == 84, || format!("homog-outerspace uses {u} PEs"))?;
    let half = preset("aespa-half-tpu-outerspace").unwrap();
    let (_, rh) = search_single_kernel(&t, &half, Bandwidth::ONE_TB_S, Objective::Makespan).unwrap();
    let (_, ro) = search_single_kernel(&t, &osp, Bandwidth::ONE_TB_S, Objective::Makespan).unwrap();
    ensure(rh.makespan_cycles < ro.makespan_cycles, || {
        format!("half-tpu-outerspace {} vs homog-outerspace {}", rh.makespan_cycles, ro.makespan_cycles)
    })?;
    Ok(format!(
        "usable 84; makespan {} < {}",
        rh.makespan_cycles, ro.makespan_cycles
    ))
}

fn criterion_7() -> Outcome {
    let suite: Vec<KernelSpec> = builtin_suite().into_iter().map(|w| w.spec).collect();
    let names = ["homog-eie", "homog-hybrid", "aespa-searched"];
    let presets: Vec<AespaConfig> = names.iter().map(|n| preset(n).unwrap()).collect();
    let opts = SearchOptions::default();
    let lim = compare_baselines(&suite, &presets, 0, Bandwidth::ONE_TB_S, &opts).unwrap();
    let unl = compare_baselines(&suite, &presets, 0, Bandwidth::Unlimited, &opts).unwrap();
    let (s, h) = (&lim.geomean[2], &lim.geomean[1]);
    let su = &unl.geomean[2];
    let detail = format!(
        "1 TB/s speedup {:.3} EDP {:.3}; unlimited speedup {:.3} EDP {:.3}; hybrid speedup {:.3}",
        s.speedup, s.edp_improvement, su.speedup, su.edp_improvement, h.speedup
    );
    let mut bad = Vec::new();
    if s.speedup <= 1.5 {
        bad.push("speedup <= 1.5x");
    }
    if s.edp_improvement <= 3.0 {
        bad.push("EDP improvement <= 3x");
    }
    if su.speedup <= s.speedup || su.edp_improvement <= s.edp_improvement {
        bad.push("unlimited bandwidth does not increase both");
    }
    if s.speedup < h.speedup {
        bad.push("below homog-hybrid");
    }
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} ({detail})", bad.join(", ")))
    }
}

fn whole_plans(cfg: &AespaConfig, spec: &KernelSpec) -> Vec<PartitionPlan> {
    let mut v = Vec::new();
    for (i, e) in cfg.clusters.iter().enumerate() {
        for p in [
            CcfPair::DENSE,
            CcfPair::SPARSE_A,
            CcfPair::SPARSE_B,
            CcfPair::INNER,
            CcfPair::OUTER,
            CcfPair::GUSTAVSON,
        ] {
            if e.kind.supports(p) {
                v.push(PartitionPlan::whole(spec, i, p));
            }
        }
    }
    v
}

fn cli_bytes(args: &[&str]) -> Vec<u8> {
    use clap::Parser;
    let cli = Cli::try_parse_from(std::iter::once("hetsparse").chain(args.iter().copied())).unwrap();
    let mut buf = Vec::new();
    execute(&cli, &mut buf).unwrap();
    buf
}

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        for w in builtin_suite() {
            for bw in [Bandwidth::ONE_TB_S, Bandwidth::Unlimited] {
                let (_, best) = search_single_kernel(&w.spec, &cfg, bw, Objective::Makespan).unwrap();
                for plan in whole_plans(&cfg, &w.spec) {
                    let r = evaluate_plan(&plan, &w.spec, &cfg, bw).unwrap();
                    ensure(best.makespan_cycles <= r.makespan_cycles, || {
                        format!(
                            "{} on {name} at {bw}: searched {} > whole-kernel {}",
                            w.name, best.makespan_cycles, r.makespan_cycles
                        )
                    })?;
                    checked += 1;
                }
            }
        }
    }
    for args in [
        &["sweep", "--seed", "7", "--bandwidth", "1e12", "--bandwidth", "unlimited"][..],
        &["plan", "--seed", "7", "--synth", "300,200,100,0.1,0.5"],
        &["schedule-many", "--seed", "7", "--demo"],
        &["verify", "--seed", "7", "--seeds", "10"],
    ] {
        ensure(cli_bytes(args) == cli_bytes(args), || format!("`{}` is not reproducible", args.join(" ")))?;
    }
    Ok(format!("{checked} whole-kernel plans dominated; CLI output byte-identical"))
}

fn criterion_9() -> Outcome {
    let cfg = preset("aespa-quarters").unwrap();
    let q = demo_queue();
    let r = schedule_many(&q, &cfg, Bandwidth::ONE_TB_S).unwrap();
    let want = [("red", Tpu), ("blue", Eie), ("green", OuterSpace), ("orange", ExTensor)];
    for ((id, kind), p) in want.iter().zip(&r.placements) {
        ensure(p.kernel == *id && p.kind == *kind, || format!("{} went to {}, expected {kind}", p.kernel, p.kind))?;
    }
    let (hn, hc) = serial_best_homogeneous(&q, Bandwidth::ONE_TB_S).unwrap();
    ensure(r.total_cycles <= hc, || format!("total {} > serial {hn} {hc}", r.total_cycles))?;
    let kinds: Vec<DataflowKind> = r.placements.iter().map(|p| p.kind).collect();
    Ok(format!("{kinds:?}; total {} <= serial {hn} {hc}", r.total_cycles))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("split-template cycle counts on 2-PE clusters", criterion_1),
        ("kernel-oracle equivalence", criterion_2),
        ("analytical vs instrumented trip counts", criterion_3),
        ("format round trip and conversion", criterion_4),
        ("calibration endpoints", criterion_5),
        ("parallelism-bound behavior", criterion_6),
        ("headline trend reproduction", criterion_7),
        ("scheduler dominance and determinism", criterion_8),
        ("many-kernel sanity", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        match r {
            Ok(d) => println!("PASS criterion {}: {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
