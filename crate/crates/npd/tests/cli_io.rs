//! Integration tests for the orchestration layer: config gates, run
//! artifacts, checkpoint resume, baseline replay, fits from files, and the
//! failure paths the commands expose.

use npd::checkpoint::read_checkpoint;
use npd::commands::{cmd_baseline, cmd_check, cmd_fit, cmd_plot, cmd_run, ExecOpts};
use npd::config::{parse_config, reference_scenario, RunConfig};
use npd::series::read_table;
use npd::Error;

/// Small, fast, well-behaved two-species scenario.
fn small_config(t_end: f64) -> RunConfig {
    let mut config = reference_scenario(24.0, 32, t_end);
    // Narrow box: bump width 1.5 sits at two grid spacings, so widen the
    // positivity floor for the truncation transient.
    config.diagnostics.positivity_tolerance = 1e-3;
    config.diagnostics.cadence = 0.25;
    config
}

#[test]
fn run_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(1.0);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    assert!(artifacts.series_path.exists());
    assert!(artifacts.summary_path.as_ref().unwrap().exists());
    assert!(artifacts.init_checkpoint.as_ref().unwrap().exists());
    assert!(artifacts.final_checkpoint.exists());
    assert!(dir.path().join("config.normalized.toml").exists());

    let table = read_table(&artifacts.series_path).unwrap();
    assert_eq!(table.rows.len() as u64, artifacts.records);
    // Records land on the cadence grid.
    let times = table.times().unwrap();
    assert_eq!(times[0], 0.0);
    assert!((times[1] - 0.25).abs() < 1e-12);

    let summary = std::fs::read_to_string(artifacts.summary_path.unwrap()).unwrap();
    assert!(summary.contains("[run]"));
    assert!(summary.contains("[init]"));
    assert!(summary.contains("[final]"));
    assert!(summary.contains("config_hash"));
}

#[test]
fn zero_t_end_yields_single_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.0);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    assert_eq!(artifacts.records, 1);
    assert_eq!(artifacts.steps, 0);
}

#[test]
fn zero_species_config_is_rejected() {
    let text = r#"
        [grid]
        box_length = 10.0
        resolution = 16

        [stepper]
        t_end = 1.0
    "#;
    // Missing species array entirely.
    assert!(parse_config(text).is_err());

    let text_empty = format!("{text}\nspecies = []\n");
    assert!(parse_config(&text_empty).is_err());
}

#[test]
fn resume_matches_uninterrupted_run_bitwise() {
    let dir = tempfile::tempdir().unwrap();

    // Uninterrupted reference: 8 steps. dt pinned so both runs agree.
    let mut full = small_config(1.0);
    full.stepper.dt = Some(0.125);
    let out_full = dir.path().join("full");
    let full_artifacts = cmd_run(&full, &ExecOpts::new(&out_full)).unwrap();

    // Interrupted: first half, then resume from the checkpoint.
    let mut first = full.clone();
    first.stepper.t_end = 0.5;
    let out_a = dir.path().join("part_a");
    let a = cmd_run(&first, &ExecOpts::new(&out_a)).unwrap();

    let mut second = full.clone();
    second.stepper.t_end = 1.0;
    let out_b = dir.path().join("part_b");
    let mut opts_b = ExecOpts::new(&out_b);
    opts_b.resume = Some(a.final_checkpoint.clone());
    let b = cmd_run(&second, &opts_b).unwrap();

    let end_full = read_checkpoint(&full_artifacts.final_checkpoint).unwrap();
    let end_resumed = read_checkpoint(&b.final_checkpoint).unwrap();
    assert_eq!(end_full.time(), end_resumed.time());
    for (x, y) in end_full
        .concentrations()
        .iter()
        .zip(end_resumed.concentrations().iter())
    {
        for (p, q) in x.coeffs().iter().zip(y.coeffs().iter()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }
}

#[test]
fn positivity_abort_writes_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(1.0);
    // Impossible floor: the truncation transient of the narrow bumps
    // guarantees small negative excursions.
    config.diagnostics.positivity_tolerance = 0.0;
    let err = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap_err();
    assert!(matches!(err, Error::PositivityAbort { .. }));
    let failure = std::fs::read_to_string(dir.path().join("failure.toml")).unwrap();
    assert!(failure.contains("positivity_abort"));
    // Partial series flushed: header plus at least the t = 0 record.
    let series = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert!(series.lines().filter(|l| !l.starts_with('#')).count() >= 2);
}

#[test]
fn baseline_replay_matches_run_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.5);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    let path = cmd_baseline(
        &artifacts.series_path,
        artifacts.init_checkpoint.as_ref().unwrap(),
        dir.path(),
    )
    .unwrap();
    let baseline = read_table(&path).unwrap();
    let run = read_table(&artifacts.series_path).unwrap();
    // At t = 0 the heat norms equal the run norms exactly.
    let h0 = baseline.column("heatsq_0_c1").unwrap();
    let l2 = run.column("l2sq_c1").unwrap();
    assert!((h0[0] - l2[0]).abs() <= 1e-12 * l2[0]);
    // Difference norms are copied through.
    let sharp = baseline.column("sharp_0_c1").unwrap();
    let sharp_run = run.column("sharp_0_c1").unwrap();
    assert_eq!(sharp.len(), sharp_run.len());
    assert_eq!(sharp[1], sharp_run[1]);
    // The heat flow only loses L^2 mass: norms nonincreasing.
    for w in h0.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn fit_spec_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(4.0);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();

    let spec_path = dir.path().join("claims.toml");
    std::fs::write(
        &spec_path,
        r#"
            [[claims]]
            id = "mass-is-constant"
            column = "mass_1"
            model = "power"
            predicted = 0.0
            tolerance = 0.01
            mode = "two-sided"
            window = [0.5, 3.5]
        "#,
    )
    .unwrap();
    let (report, path) = cmd_fit(&artifacts.series_path, Some(&spec_path), dir.path()).unwrap();
    assert!(path.exists());
    assert_eq!(report.outcomes.len(), 1);
    assert!(report.all_pass);
    assert_eq!(report.outcomes[0].id, "mass-is-constant");
    assert!((report.outcomes[0].measured).abs() < 1e-9);
}

#[test]
fn fit_on_unknown_column_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(1.0);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    let spec_path = dir.path().join("claims.toml");
    std::fs::write(
        &spec_path,
        r#"
            [[claims]]
            id = "nope"
            column = "no_such_column"
            model = "power"
            predicted = 0.0
            tolerance = 0.1
            mode = "two-sided"
        "#,
    )
    .unwrap();
    let err = cmd_fit(&artifacts.series_path, Some(&spec_path), dir.path()).unwrap_err();
    assert!(format!("{err}").contains("no_such_column"));
}

#[test]
fn check_passes_on_resolved_config() {
    // Generous box and width: everything resolved, all gates pass.
    let dir = tempfile::tempdir().unwrap();
    let mut config = reference_scenario(24.0, 48, 2.0);
    // Width 1.5 at dx = 0.5: comfortably resolved.
    let report = cmd_check(&config, dir.path()).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(dir.path().join("check.toml").exists());
    // Under-resolution makes the identity gate fail.
    config.grid.resolution = 16;
    config.diagnostics.positivity_tolerance = 1e-2;
    let err = cmd_check(&config, dir.path()).unwrap_err();
    assert!(matches!(err, Error::CheckFailed(_)));
}

#[test]
fn plot_emission_from_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.5);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    let files = cmd_plot(&artifacts.series_path, dir.path()).unwrap();
    assert!(files.iter().any(|f| f.ends_with("norms_loglog.py")));
    for f in &files {
        assert!(f.exists());
    }
    // Extracts parse as whitespace-separated numbers after the header.
    let norms = std::fs::read_to_string(dir.path().join("plots/norms.dat")).unwrap();
    let first_data = norms.lines().nth(1).unwrap();
    for token in first_data.split_whitespace() {
        token.parse::<f64>().unwrap();
    }
}

#[test]
fn deterministic_reruns_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.5);
    let mut opts1 = ExecOpts::new(dir.path().join("a"));
    opts1.deterministic = true;
    let mut opts2 = ExecOpts::new(dir.path().join("b"));
    opts2.deterministic = true;
    let a = cmd_run(&config, &opts1).unwrap();
    let b = cmd_run(&config, &opts2).unwrap();
    assert_eq!(
        std::fs::read(&a.series_path).unwrap(),
        std::fs::read(&b.series_path).unwrap()
    );
}

#[test]
fn config_echo_reparses_to_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.5);
    cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    let echo = std::fs::read_to_string(dir.path().join("config.normalized.toml")).unwrap();
    let reparsed = parse_config(&echo).unwrap();
    assert_eq!(config, reparsed);
}

#[test]
fn resume_requires_matching_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(0.5);
    let artifacts = cmd_run(&config, &ExecOpts::new(dir.path().join("a"))).unwrap();
    let mut other = small_config(0.5);
    other.grid.resolution = 16;
    let mut opts = ExecOpts::new(dir.path().join("b"));
    opts.resume = Some(artifacts.final_checkpoint);
    assert!(matches!(
        cmd_run(&other, &opts),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn checkpoint_paths_written_at_configured_times() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(1.0);
    config.output.checkpoint_times = vec![0.5];
    cmd_run(&config, &ExecOpts::new(dir.path())).unwrap();
    let found = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .any(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.starts_with("ckpt_") && name.ends_with(".ckpt")
        });
    assert!(found, "intermediate checkpoint missing");
}
