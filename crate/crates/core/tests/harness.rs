use std::fs;

use fsa_sense::harness::*;
use fsa_sense::Error;

fn opts() -> RunOptions {
    RunOptions::default()
}

fn trimmed(name: &str, trials: usize) -> ExperimentConfig {
    let mut cfg = preset(name).unwrap();
    cfg.trials = trials;
    cfg
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = trimmed("benchmark_angles", 2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(a.path()), &opts()).unwrap();
    run_experiment(&cfg, Some(b.path()), &opts()).unwrap();
    let ra = fs::read(a.path().join("report.json")).unwrap();
    let rb = fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    for f in ["runtime.json", "config.toml"] {
        assert!(a.path().join(f).is_file(), "{f}");
    }
    let trial_dir = fs::read_dir(a.path().join("trials")).unwrap().next().unwrap().unwrap().path();
    let first = trial_dir.join("trial_000");
    assert!(first.join("profiles.csv").is_file());
    assert!(first.join("estimates.csv").is_file());
    assert!(!first.join("trace.csv").exists());
    assert!(a.path().read_dir().unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with(".staging")));
}

#[test]
fn seed_override_changes_seeds_and_trace_flag_emits_traces() {
    let mut cfg = trimmed("bedroom", 1);
    cfg.cases.truncate(1);
    let out = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, Some(out.path()), &RunOptions { seed_override: Some(77), emit_trace: true }).unwrap();
    assert_eq!(report.base_seed, 77);
    assert_eq!(report.seeds, vec![trial_seed(77, 0, 0)]);
    let case_dir = fs::read_dir(out.path().join("trials")).unwrap().next().unwrap().unwrap().path();
    assert!(case_dir.join("trial_000").join("trace.csv").is_file());
    assert!(case_dir.join("trial_000").join("respiration.json").is_file());
}

#[test]
fn config_errors_name_the_field() {
    let cfg = trimmed("bedroom", 1);
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);

    let unknown = text.replacen("trials = 1", "trials = 1\ntrails = 3", 1);
    let err = ExperimentConfig::parse(&unknown).unwrap_err();
    assert!(err.is_config_error());
    assert!(err.to_string().contains("trails"), "{err}");

    let wrong_type = serde_json::to_string(&cfg).unwrap().replacen("\"duration\":60.0", "\"duration\":\"long\"", 1);
    let err = ExperimentConfig::parse(&wrong_type).unwrap_err();
    assert!(err.to_string().contains("cases[0].scenario.duration"), "{err}");

    let mut bad = cfg.clone();
    bad.cases[0].truth.directions.clear();
    let err = bad.validate().unwrap_err();
    assert!(err.to_string().contains("cases[0].truth.directions"), "{err}");
}

#[test]
fn living_room_reports_three_records() {
    let cfg = trimmed("living_room_multitarget", 1);
    let report = run_experiment(&cfg, None, &opts()).unwrap();
    assert_eq!(report.trials.len(), 1);
    assert_eq!(report.trials[0].respiration.len(), 3);
    assert_eq!(report.metrics.respiration_expected, 3);
}

#[test]
fn confusion_rows_sum_to_trial_counts() {
    let cfg = trimmed("corner_trajectories", 2);
    let report = run_experiment(&cfg, None, &opts()).unwrap();
    let confusion = report.metrics.confusion.as_ref().unwrap();
    for (label, row) in confusion.labels.iter().zip(&confusion.counts) {
        let expected = report.trials.iter().filter(|t| t.true_region.as_deref() == Some(label)).count();
        assert_eq!(row.iter().sum::<usize>(), expected);
    }
    assert_eq!(confusion.total(), report.trials.len());
}

#[test]
fn sweep_rejects_bad_input() {
    let cfg = trimmed("benchmark_distance", 1);
    assert!(matches!(sweep(&cfg, SweepParameter::TargetDistance, &[], None, &opts()), Err(Error::Config { .. })));
    assert!("wall_height".parse::<SweepParameter>().unwrap_err().is_config_error());
    assert!(apply_sweep(&cfg, SweepParameter::TargetDistance, -1.0).is_err());
    assert_eq!("noise_sigma".parse::<SweepParameter>().unwrap(), SweepParameter::NoiseSigma);
}

#[test]
fn sweep_writes_one_report_per_value() {
    let mut cfg = trimmed("benchmark_distance", 1);
    cfg.cases.truncate(1);
    let out = tempfile::tempdir().unwrap();
    let reports = sweep(&cfg, SweepParameter::TargetDistance, &[1.0, 3.0], Some(out.path()), &opts()).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].base_seed, reports[1].base_seed);
    assert!(out.path().join("sweep.json").is_file());
    assert!(out.path().join("target_distance_1").join("report.json").is_file());
    assert!(out.path().join("target_distance_3").join("report.json").is_file());
}

#[test]
fn distance_sweep_moves_targets_radially() {
    let cfg = trimmed("benchmark_angles", 1);
    let moved = apply_sweep(&cfg, SweepParameter::TargetDistance, 4.0).unwrap();
    for (a, b) in cfg.cases.iter().zip(&moved.cases) {
        let tx = a.scenario.geometry.tx_position;
        let ra = a.scenario.targets[0].trajectory.reference_point(a.scenario.duration, tx);
        let rb = b.scenario.targets[0].trajectory.reference_point(b.scenario.duration, tx);
        let g = &a.scenario.geometry;
        assert!((g.relative_angle(ra) - g.relative_angle(rb)).abs() < 1e-9);
        assert!((fsa_sense::scene::distance(rb, tx) - 4.0).abs() < 1e-9);
    }
}

#[test]
fn angle_error_grows_with_noise() {
    let mut cfg = trimmed("benchmark_angles", 10);
    cfg.cases.retain(|c| c.group.as_deref() == Some("large") && c.truth.angle_deg.unwrap().abs() <= 15.0);
    let values = [0.02, 0.5, 2.0];
    let reports = sweep(&cfg, SweepParameter::NoiseSigma, &values, None, &opts()).unwrap();
    let mae: Vec<f64> = reports.iter().map(|r| r.metrics.angle_mae_deg.unwrap()).collect();
    for w in mae.windows(2) {
        assert!(w[1] >= w[0] - 0.5, "{mae:?}");
    }
    assert!(mae[2] > mae[0], "{mae:?}");
}

#[test]
fn empty_scene_is_invalid_for_both_antennas() {
    let mut cfg = trimmed("bedroom", 1);
    cfg.cases.truncate(1);
    cfg.cases[0].scenario.targets.clear();
    cfg.cases[0].truth.rates_bpm.clear();
    cfg.cases[0].scenario.snr_db = None;
    cfg.cases[0].scenario.noise_sigma = Some(0.1);
    let report = compare_antennas(&cfg, None, &opts()).unwrap();
    let t = &report.trials[0];
    assert!(t.fsa.iter().chain(&t.omni).all(|r| !r.valid));
    assert_eq!(t.fsa_error_bpm, None);
    assert_eq!(t.omni_error_bpm, None);
}

#[test]
fn quiet_bedroom_is_accurate_for_both_antennas() {
    let cfg = trimmed("bedroom", 2);
    let out = tempfile::tempdir().unwrap();
    let report = compare_antennas(&cfg, Some(out.path()), &opts()).unwrap();
    for t in &report.trials {
        assert!(t.fsa_error_bpm.unwrap() <= 0.62, "{t:?}");
        assert!(t.omni_error_bpm.unwrap() <= 0.62, "{t:?}");
    }
    assert!(out.path().join("comparison.json").is_file());
    assert!(compare_antennas(&trimmed("benchmark_angles", 1), None, &opts()).unwrap_err().is_config_error());
}

#[test]
fn failed_runs_leave_the_output_directory_alone() {
    let mut cfg = trimmed("benchmark_angles", 1);
    cfg.cases.truncate(1);
    // shorter than one pipeline window
    cfg.cases[0].scenario.duration = 0.5;
    let out = tempfile::tempdir().unwrap();
    fs::write(out.path().join("keep.txt"), "x").unwrap();
    assert!(run_experiment(&cfg, Some(out.path()), &opts()).is_err());
    let names: Vec<String> = fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["keep.txt".to_string()]);
}

#[test]
fn simulate_writes_traces_and_map() {
    let mut cfg = trimmed("bedroom", 3);
    cfg.cases.truncate(1);
    cfg.cases[0].scenario.duration = 2.0;
    let out = tempfile::tempdir().unwrap();
    let written = simulate(&cfg, out.path(), 2, &opts()).unwrap();
    assert_eq!(written.len(), 2);
    for p in &written {
        let trace = fsa_sense::channel::CsiTrace::load(p).unwrap();
        assert_eq!(trace.num_samples(), 400);
    }
    assert!(out.path().join("map.csv").is_file());
}
