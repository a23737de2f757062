//! Bundled scenarios, calibration, sweeps and report files.

use dpspon::link::{CALIBRATED_EXCESS_LOSS_DB, CALIBRATED_VISIBILITY};
use dpspon::raman::RamanProfile;
use dpspon::scenario::{
    apply_axis, bundled_scenario, bundled_sweep, calibrate, calibrate_baseline, emit_report,
    run_scenario, run_sweep, sidecar_path, Anchor, Format, FreeParameter, Mode, Observable, Report,
    ScenarioConfig, SweepSpec, CALIBRATED_RAMAN_SCALE, SWEEP_COLUMNS,
};
use dpspon::Error;

fn oracle(cfg: &ScenarioConfig) -> dpspon::scenario::ScenarioReport {
    let mut cfg = cfg.clone();
    cfg.run.mode = Mode::Oracle;
    run_scenario(&cfg).unwrap()
}

#[test]
fn bundled_defaults_hold_the_calibrated_constants() {
    let cal = calibrate_baseline().unwrap();
    assert!((cal.raman_scale.value / CALIBRATED_RAMAN_SCALE - 1.0).abs() < 1e-6);
    assert!((cal.excess_loss.value - CALIBRATED_EXCESS_LOSS_DB).abs() < 1e-6);
    assert!((cal.visibility.value - CALIBRATED_VISIBILITY).abs() < 1e-6);
    assert!(cal.raman_scale.residual.abs() < 2.0);
}

#[test]
fn excess_loss_matches_closed_form_estimate() {
    // without dark counts or detector effects:
    // 2700 = R · μ · η · 10^(−(L + X)/10)  →  X = 10·log10(R μ η / 2700) − L
    let n = bundled_scenario("N").unwrap();
    let report = oracle(&n);
    let tx = &n.transmitter;
    let det = &n.detector.model;
    let closed = 10.0
        * (tx.symbol_rate_hz * tx.mean_photon_number * det.efficiency / 2700.0).log10()
        - report.path_loss_db;
    assert!((closed - 17.69).abs() < 0.01, "{closed}");
    assert!((CALIBRATED_EXCESS_LOSS_DB - closed).abs() < 0.2);
}

#[test]
fn visibility_inverts_the_qber_composition() {
    // e = (q·(S + U) − U/2) / S with the calibrated rates; V = 1 − 2e
    let report = oracle(&bundled_scenario("N").unwrap());
    let s = report.oracle.signal_rate;
    let u = report.oracle.uncorrelated_rate();
    let e = (0.0377 * (s + u) - 0.5 * u) / s;
    assert!((1.0 - 2.0 * e - CALIBRATED_VISIBILITY).abs() < 1e-6);
}

#[test]
fn quantum_path_loss_is_eighteen_db() {
    let report = oracle(&bundled_scenario("N").unwrap());
    assert!(
        (report.path_loss_db - 18.0).abs() < 0.01,
        "{}",
        report.path_loss_db
    );
}

#[test]
fn raman_anchor_and_split_halving() {
    let raman_anchor = bundled_scenario("raman-anchor").unwrap();
    assert!((oracle(&raman_anchor).raman_counts_s - 360.0).abs() < 2.0);
    let split32 = apply_axis(&raman_anchor, "topology.splitter.ports", 32.0).unwrap();
    assert_eq!(split32.topology.splitter.ports, 32);
    assert!((oracle(&split32).raman_counts_s - 180.0).abs() < 1.0);
}

#[test]
fn raman_scale_fit_from_a_file_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anchor.json");
    std::fs::write(&path, bundled_scenario("raman-anchor").unwrap().to_json()).unwrap();
    let mut cfg = bundled_scenario("N").unwrap();
    cfg.raman.scale = 1.0;
    let fit = calibrate(
        &cfg,
        &[Anchor::new(
            path.to_str().unwrap(),
            Observable::RamanCounts,
            360.0,
        )],
        FreeParameter::RamanScale,
    )
    .unwrap();
    assert!(fit.residual.abs() < 2.0);
    assert!((fit.value / CALIBRATED_RAMAN_SCALE - 1.0).abs() < 1e-6);
}

#[test]
fn calibration_without_anchors_or_with_bad_target_fails() {
    let cfg = bundled_scenario("N").unwrap();
    assert!(matches!(
        calibrate(&cfg, &[], FreeParameter::ExcessLoss),
        Err(Error::Argument(_))
    ));
    // no visibility in (0.5, 1] reaches a 40% QBER
    assert!(calibrate(
        &cfg,
        &[Anchor::new("self", Observable::Qber, 0.4)],
        FreeParameter::Visibility
    )
    .is_err());
}

#[test]
fn upstream_sweep_crosses_the_positivity_threshold() {
    let sweep = bundled_sweep("upstream").unwrap();
    let res = run_sweep(&bundled_scenario(&sweep.scenario).unwrap(), &sweep.spec).unwrap();
    let qber = res.column("qber").unwrap();
    let secure = res.column("secure_rate_bs").unwrap();
    assert!(qber.windows(2).all(|w| w[1] > w[0]));
    assert!((qber[0] - 0.0377).abs() < 1e-6);
    assert!(secure[0] > 460.0);
    assert_eq!(*secure.last().unwrap(), 0.0);
    let us20 = oracle(&bundled_scenario("US-20").unwrap());
    assert!((us20.qber - qber[4]).abs() < 1e-12);
}

#[test]
fn sweep_csv_has_fixed_columns_and_is_reproducible() {
    let mut cfg = bundled_scenario("US-1").unwrap();
    cfg.run.mode = Mode::MonteCarlo;
    cfg.run.duration_s = 0.5;
    let spec = SweepSpec {
        axis: "transmitter.mean_photon_number".to_string(),
        values: vec![0.05, 0.1, 0.2],
    };
    let csv = |cfg: &ScenarioConfig| {
        let mut out = Vec::new();
        run_sweep(cfg, &spec).unwrap().write_csv(&mut out).unwrap();
        String::from_utf8(out).unwrap()
    };
    let first = csv(&cfg);
    assert_eq!(first, csv(&cfg));
    assert_eq!(first.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(first.lines().count(), 4);
    cfg.run.seed += 1;
    assert_ne!(first, csv(&cfg));
}

#[test]
fn sweep_axis_errors_name_the_axis() {
    let cfg = bundled_scenario("N").unwrap();
    for (axis, value) in [
        ("topology.nonexistent", 1.0),
        ("name", 1.0),
        ("topology.splitter.ports", 2.5),
        ("upstream_count", -1.0),
        ("reach_km", 0.5),
    ] {
        let err = apply_axis(&cfg, axis, value).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{axis}: {err}");
        assert!(err.to_string().contains(axis), "{err}");
    }
    let empty = SweepSpec {
        axis: "loss_budget_db".to_string(),
        values: vec![],
    };
    assert!(run_sweep(&cfg, &empty).is_err());
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled_scenario("C").unwrap();
    let report = Report::scenario(&cfg, oracle(&cfg));

    let json = dir.path().join("c.json");
    emit_report(&report, Format::Json, &json).unwrap();
    let back = Report::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, report);
    assert!(!sidecar_path(&json).exists());

    let csv = dir.path().join("c.csv");
    emit_report(&report, Format::Csv, &csv).unwrap();
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("C,"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(&csv)).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], cfg.hash());
    assert_eq!(meta["schema"], 1);
}

#[test]
fn external_raman_table_is_resolved_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = Vec::new();
    RamanProfile::silica(300.0).write_csv(&mut table).unwrap();
    std::fs::write(dir.path().join("silica.csv"), table).unwrap();
    let mut cfg = bundled_scenario("raman-anchor").unwrap();
    let builtin = oracle(&cfg).raman_counts_s;
    cfg.raman.table_csv = Some("silica.csv".into());
    let path = dir.path().join("raman-anchor.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let loaded = ScenarioConfig::from_path(&path).unwrap();
    let from_file = oracle(&loaded).raman_counts_s;
    assert!(
        (from_file / builtin - 1.0).abs() < 1e-9,
        "{from_file} vs {builtin}"
    );
}

#[test]
fn unreadable_config_is_an_io_error() {
    let err = ScenarioConfig::from_path("/nonexistent/scenario.json".as_ref()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}
