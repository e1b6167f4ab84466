use topopreserve_harness::experiment::sweep_table;
use topopreserve_harness::output::{errors_csv, read_report};
use topopreserve_harness::{
    emit_outputs, run_experiment, sweep_alpha, ExperimentConfig, ExperimentReport, Format, HarnessError,
};

fn small(extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("n = 4\ngraph_seed = 3\nt_grid = 20, 40, 80\ntrials = 4\n{extra}")).unwrap()
}

#[test]
fn report_json_is_byte_identical_across_runs() {
    let cfg = ExperimentConfig { trials: 1, ..small("") };
    let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_matches_serial() {
    let cfg = small("alpha = 0, 1\nlag = 1, -1\n");
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    assert_eq!(serde_json::to_string(&serial).unwrap(), serde_json::to_string(&wide).unwrap());
}

#[test]
fn cells_account_for_every_trial() {
    let cfg = ExperimentConfig::parse("n = 4\ngraph_seed = 3\nalpha = 0, 2\nt_grid = 3, 10, 40\ntrials = 4\n").unwrap();
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.cells.len(), 6);
    for c in &report.cells {
        assert_eq!(c.trials_ok + c.trials_failed, cfg.trials, "{c:?}");
    }
    // Three observations of four nodes leave the Gram matrix singular.
    let short = report.cell(0.0, 3).unwrap();
    assert_eq!(short.trials_failed, 4);
    assert!(!short.valid && short.mean_error.is_none());
    assert!(report.cell(0.0, 40).unwrap().valid);
    assert_eq!(report.invalid_cells(), 2);
    assert_eq!(report.metadata.trial_seeds, vec![1, 2, 3, 4]);
    assert_eq!(report.metadata.config_hash, cfg.hash());
}

#[test]
fn oracle_attached_within_guard() {
    let report = run_experiment(&small("")).unwrap();
    assert!(report.cells.iter().all(|c| c.oracle.is_some()));
    let dep = run_experiment(&small("lag = 1, -1\n")).unwrap();
    let json = serde_json::to_value(&dep.cells[0]).unwrap();
    assert_eq!(json["oracle"]["kind"], "r_xi");
    let off = run_experiment(&small("oracle = false\n")).unwrap();
    assert!(off.cells.iter().all(|c| c.oracle.is_none()));
}

#[test]
fn deviation_summary_covers_horizon() {
    let report = run_experiment(&small("")).unwrap();
    let d = &report.deviations[0];
    assert_eq!(d.horizon, 80);
    assert_eq!(d.trials_used, 4);
    assert_eq!(d.at(0), Some(0.0));
    assert!(d.at(80).unwrap() == d.final_value && d.final_value <= d.peak);
    assert!(d.at(40).is_some());
}

#[test]
fn empty_report_gives_header_only_csv() {
    let csv = errors_csv(&ExperimentReport::empty("x".into()));
    assert_eq!(csv, "alpha,T,mean_error,stderr_error,trials_ok\n");
}

#[test]
fn csv_rows_match_cells() {
    let report = run_experiment(&small("alpha = 0, 1\n")).unwrap();
    let csv = errors_csv(&report);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0,20,"));
    assert!(!csv.contains('\r'));
}

#[test]
fn emitted_json_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small("alpha = 0, 0.5\nlag = 1, -1\n")).unwrap();
    let written = emit_outputs(&report, &[Format::Csv, Format::Json, Format::Svg], dir.path()).unwrap();
    assert_eq!(written.len(), 5);
    assert_eq!(read_report(&dir.path().join("report.json")).unwrap(), report);
    let svg = std::fs::read_to_string(dir.path().join("errors.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(&report.metadata.config_hash[..12]));
    let empty = ExperimentReport::empty("e".into());
    emit_outputs(&empty, &[Format::Svg], dir.path()).unwrap();
}

#[test]
fn sweep_requires_wide_grid() {
    for alphas in ["0", "0, 1, 2, 6", "0, 0, 1, 2, 6", "0.5, 1, 2, 3, 4, 6", "0, 1, 2, 3, 4, 5"] {
        let cfg = small(&format!("alpha = {alphas}\n"));
        let err = sweep_alpha(&cfg).unwrap_err();
        assert!(matches!(err, HarnessError::ConfigInvalid(_)), "{alphas}: {err}");
    }
    let cfg = small("alpha = 0, 1, 2, 3, 6\n");
    let (report, table) = sweep_alpha(&cfg).unwrap();
    assert_eq!(table, sweep_table(&report, &cfg.alphas, &cfg.t_grid));
    assert_eq!(table.argmax.len(), 3);
}

#[test]
fn larger_alpha_decays_slower() {
    let cfg = ExperimentConfig::parse(
        "n = 7\ngraph_seed = 42\nalpha = 0, 0.5, 1, 1.5, 2, 2.443\nt_min = 100\nt_max = 3000\nt_points = 10\n",
    )
    .unwrap();
    let report = run_experiment(&cfg).unwrap();
    let slopes: Vec<f64> = cfg.alphas.iter().map(|&a| report.fit(a).unwrap().error.unwrap().exponent).collect();
    for pair in slopes.windows(2) {
        assert!(pair[0] < pair[1], "{slopes:?}");
    }
}

#[test]
fn one_lag_deviation_vanishes_but_error_does_not() {
    let cfg = ExperimentConfig::parse("n = 7\ngraph_seed = 42\nalpha = 1\nlag = 1, -1\nt_grid = 100, 1000, 10000\n").unwrap();
    let report = run_experiment(&cfg).unwrap();
    let d = report.deviation(1.0).unwrap();
    assert!(d.final_value < 0.01 * d.peak, "{} vs peak {}", d.final_value, d.peak);
    let early = report.cell(1.0, 100).unwrap().mean_error.unwrap();
    let late = report.cell(1.0, 10_000).unwrap().mean_error.unwrap();
    assert!(late >= early / 3.0, "{late} vs {early}");
}

#[test]
fn sweep_argmax_stable_across_seeds() {
    let mut found = Vec::new();
    for seed in [1, 2, 3] {
        let cfg = ExperimentConfig::parse(&format!(
            "n = 7\ngraph_seed = 42\nbase_seed = {seed}\nalpha = 0, 1, 2, 2.443, 3, 4, 5, 6\nt_grid = 500\n"
        ))
        .unwrap();
        found.push(sweep_alpha(&cfg).unwrap().1.argmax[0].unwrap());
    }
    assert!(found.iter().all(|a| (2.0..=3.0).contains(a)), "argmax per seed {found:?}");
}
