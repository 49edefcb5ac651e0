use proptest::prelude::*;

use hetsparse::archtemplate::{
    allocate, peak_tflops, preset, AespaConfig, Calibration, HOMOGENEOUS_PRESETS, PRESET_NAMES,
};
use hetsparse::costmodel::DataflowKind;

fn mix() -> impl Strategy<Value = Vec<(DataflowKind, f64)>> {
    prop::collection::vec((prop::sample::select(DataflowKind::ALL.to_vec()), 1u32..10), 1..5).prop_map(|v| {
        let total: u32 = v.iter().map(|x| x.1).sum();
        v.into_iter().map(|(k, w)| (k, w as f64 / total as f64)).collect()
    })
}

proptest! {
    #[test]
    fn allocations_fit_the_budget(m in mix()) {
        let cal = Calibration::shipped();
        let area = cal.area_model();
        let c = allocate(&m, &area).unwrap();
        prop_assert!(area.area_of(&c.cluster_configs()).unwrap() <= cal.compute_area_budget * (1.0 + 1e-12));
        prop_assert!(c.validate(&area).is_ok());
    }

    #[test]
    fn peak_is_linear_and_order_free(counts in prop::collection::vec((prop::sample::select(DataflowKind::ALL.to_vec()), 1u64..5000), 1..6), scale in 1u64..5) {
        let c = AespaConfig::from_pe_counts("x", &counts).unwrap();
        let scaled: Vec<_> = counts.iter().map(|&(k, n)| (k, n * scale)).collect();
        let s = AespaConfig::from_pe_counts("y", &scaled).unwrap();
        prop_assert!((peak_tflops(&s) - scale as f64 * peak_tflops(&c)).abs() < 1e-9 * peak_tflops(&s));
        let mut rev = counts.clone();
        rev.reverse();
        let r = AespaConfig::from_pe_counts("z", &rev).unwrap();
        prop_assert_eq!(peak_tflops(&r), peak_tflops(&c));
    }
}

#[test]
fn homogeneous_peaks_are_ordered() {
    let p = |n: &str| peak_tflops(&preset(n).unwrap());
    let (tpu, eie, osp, mr, ext, hy) = (
        p("homog-tpu"),
        p("homog-eie"),
        p("homog-outerspace"),
        p("homog-matraptor"),
        p("homog-extensor"),
        p("homog-hybrid"),
    );
    assert!(tpu >= eie);
    assert!(eie >= osp && eie >= mr);
    assert!(osp >= ext && mr >= ext);
    assert!(ext >= hy);
}

#[test]
fn every_preset_is_feasible_and_round_trips() {
    let cal = Calibration::shipped();
    let area = cal.area_model();
    let dir = tempfile::tempdir().unwrap();
    for name in PRESET_NAMES {
        let c = preset(name).unwrap();
        c.validate(&area).unwrap();
        let p = dir.path().join(format!("{name}.toml"));
        c.save(&p).unwrap();
        assert_eq!(AespaConfig::load(&p, cal).unwrap(), c, "{name}");
    }
    assert_eq!(HOMOGENEOUS_PRESETS.len(), 6);
}

#[test]
fn searched_preset_is_heterogeneous() {
    let c = preset("aespa-searched").unwrap();
    assert!(c.searched);
    assert!(c.clusters.len() >= 2);
    let total: f64 = c.clusters.iter().filter_map(|e| e.area_fraction).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn area_fractions_in_toml() {
    let cal = Calibration::shipped();
    let c = AespaConfig::from_toml(
        "name = \"half\"\n[[clusters]]\nkind = \"tpu\"\narea_fraction = 0.5\n[[clusters]]\nkind = \"eie\"\narea_fraction = 0.5\n",
        cal,
    )
    .unwrap();
    assert_eq!(c.clusters[0].pe_count, 8640);
    assert_eq!(c.clusters[1].pe_count, 5400);
}
