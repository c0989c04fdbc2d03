use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{trial_seed, AntennaSetup, Case, ExperimentConfig, SweepParameter, Task};
use super::report::{
    trial_rate_error, ComparisonReport, ComparisonTrial, ExperimentReport, Metrics, RespirationRecord, TrialRecord,
    REPORT_SCHEMA_VERSION,
};
use crate::channel::{omnidirectional_baseline, synthesize, CsiTrace};
use crate::dispersion::FrequencyAngleMap;
use crate::error::{Error, Result};
use crate::estimators::direction::estimates_from_profiles;
use crate::estimators::{
    classify_region, estimate_direction, multi_target_respiration, write_estimates_csv, RespirationOutcome,
};
use crate::pipeline::{aggregate_profiles, csi_ratio, ssnr_profiles, write_profiles_csv};
use crate::scene::{Scenario, Trajectory};

const JITTER_STREAM: u64 = 2;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the config's base seed.
    pub seed_override: Option<u64>,
    /// Also write every synthesized trace as CSV.
    pub emit_trace: bool,
}

/// Output directory that only replaces its contents once a run succeeds.
struct Staging {
    final_dir: PathBuf,
    dir: PathBuf,
}

impl Staging {
    fn create(final_dir: &Path) -> Result<Self> {
        fs::create_dir_all(final_dir)?;
        let dir = final_dir.join(format!(".staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self { final_dir: final_dir.to_path_buf(), dir })
    }

    fn commit(self) -> Result<()> {
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let target = self.final_dir.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target)?;
            } else if target.exists() {
                fs::remove_file(&target)?;
            }
            fs::rename(entry.path(), target)?;
        }
        fs::remove_dir_all(&self.dir)?;
        Ok(())
    }

    fn abort(self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

fn with_staging<T>(out_dir: Option<&Path>, f: impl FnOnce(Option<&Path>) -> Result<T>) -> Result<T> {
    let Some(out) = out_dir else { return f(None) };
    let staging = Staging::create(out)?;
    match f(Some(&staging.dir)) {
        Ok(v) => {
            staging.commit()?;
            Ok(v)
        }
        Err(e) => {
            staging.abort();
            Err(e)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct Runtime {
    runtime_s: f64,
    parallel: bool,
}

fn write_runtime(dir: &Path, runtime_s: f64) -> Result<()> {
    write_json(
        &dir.join("runtime.json"),
        &Runtime { runtime_s, parallel: crate::par::is_parallel() },
    )
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '+' || c == '.' { c } else { '_' })
        .collect()
}

/// Scenario of one trial: the trial seed and, if configured, a random shift
/// of all targets within `start_jitter_m`.
pub fn trial_scenario(case: &Case, seed: u64) -> Scenario {
    let mut s = case.scenario.clone();
    s.rng_seed = seed;
    if case.start_jitter_m > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(JITTER_STREAM);
        let r = case.start_jitter_m * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let delta = [r * a.cos(), r * a.sin()];
        for t in &mut s.targets {
            t.trajectory.translate(delta);
        }
    }
    s
}

fn seeds_of(cfg: &ExperimentConfig, base_seed: u64) -> Vec<(usize, usize, u64)> {
    (0..cfg.cases.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t, trial_seed(base_seed, c, t))))
        .collect()
}

fn respiration_records(outcome: &RespirationOutcome, case: &Case) -> Vec<RespirationRecord> {
    outcome
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let truth = case.truth.rates_bpm.get(i).copied();
            let rate = if r.valid { r.rate_bpm } else { None };
            RespirationRecord {
                direction_deg: r.direction,
                true_rate_bpm: truth,
                estimated_rate_bpm: rate,
                abs_error_bpm: truth.zip(rate).map(|(t, e)| (t - e).abs()),
                valid: r.valid,
            }
        })
        .collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    setup: &AntennaSetup,
    case_index: usize,
    trial: usize,
    seed: u64,
    dir: Option<&Path>,
    emit_trace: bool,
) -> Result<TrialRecord> {
    let case = &cfg.cases[case_index];
    let scenario = trial_scenario(case, seed);
    let trace = synthesize(&scenario, setup.pattern.as_ref(), &setup.subcarrier_freqs)?;
    let mut record = TrialRecord::new(&case.label, case.group.clone(), trial, seed);
    let trial_dir = match dir {
        Some(d) => {
            let p = d.join("trials").join(sanitize(&case.label)).join(format!("trial_{trial:03}"));
            fs::create_dir_all(&p)?;
            Some(p)
        }
        None => None,
    };
    if let (true, Some(d)) = (emit_trace, &trial_dir) {
        trace.save(d.join("trace.csv"))?;
    }

    match cfg.task {
        Task::Direction | Task::Region => {
            let ratio = csi_ratio(&trace)?;
            let profiles = ssnr_profiles(&ratio, &cfg.pipeline)?;
            let estimates = estimates_from_profiles(&profiles, &setup.map, cfg.no_motion_threshold)?;
            record.windows = estimates.len();
            record.valid_windows = estimates.iter().filter(|e| e.valid).count();
            if let Some(d) = &trial_dir {
                write_profiles_csv(BufWriter::new(File::create(d.join("profiles.csv"))?), &profiles)?;
                write_estimates_csv(BufWriter::new(File::create(d.join("estimates.csv"))?), &estimates)?;
            }
            if cfg.task == Task::Direction {
                let overall = aggregate_profiles(&profiles, cfg.pipeline.epsilon)?;
                let est = estimate_direction(&overall, &setup.map, cfg.no_motion_threshold, None)?;
                let truth = case.truth.angle_deg.expect("validated");
                record.true_angle_deg = Some(truth);
                record.estimated_angle_deg = Some(est.angle);
                record.angle_error_deg = Some((est.angle - truth).abs());
                record.motion_detected = Some(est.valid);
            } else {
                let regions = cfg.regions.as_ref().expect("validated");
                record.true_region = case.truth.region.clone();
                record.predicted_region = match classify_region(&estimates, regions, cfg.region_rule) {
                    Ok(label) => Some(label),
                    Err(Error::Unclassifiable) => None,
                    Err(e) => return Err(e),
                };
            }
        }
        Task::Respiration => {
            let outcome = multi_target_respiration(&trace, &setup.map, &case.truth.directions, &cfg.respiration)?;
            record.respiration = respiration_records(&outcome, case);
            record.warnings = outcome.warnings.clone();
            if let Some(d) = &trial_dir {
                write_json(&d.join("respiration.json"), &outcome)?;
                write_waveforms(&d.join("waveforms.csv"), &outcome, trace.sample_rate())?;
            }
        }
    }
    Ok(record)
}

fn write_waveforms(path: &Path, outcome: &RespirationOutcome, sample_rate: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["t".to_string()];
    header.extend(outcome.results.iter().map(|r| format!("dir_{}", r.direction)));
    w.write_record(&header)?;
    let n = outcome.results.iter().map(|r| r.waveform.len()).max().unwrap_or(0);
    for k in 0..n {
        let mut row = vec![(k as f64 / sample_rate).to_string()];
        row.extend(
            outcome
                .results
                .iter()
                .map(|r| r.waveform.get(k).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn check_regions_against_map(cfg: &ExperimentConfig, map: &FrequencyAngleMap) -> Result<()> {
    match &cfg.regions {
        Some(r) if cfg.task == Task::Region => r.validate(Some(map)),
        _ => Ok(()),
    }
}

/// Runs every (case, trial) pair and writes artifacts under `out_dir`:
/// `report.json`, `runtime.json`, `config.toml` and `trials/<case>/trial_NNN/`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let base_seed = opts.seed_override.unwrap_or(cfg.base_seed);
    let setup = cfg.antenna_setup()?;
    check_regions_against_map(cfg, &setup.map)?;
    let jobs = seeds_of(cfg, base_seed);

    with_staging(out_dir, |dir| {
        let results = crate::par::map_slice(&jobs, |&(c, t, seed)| {
            run_trial(cfg, &setup, c, t, seed, dir, opts.emit_trace)
        });
        let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
        let labels = cfg.regions.as_ref().filter(|_| cfg.task == Task::Region).map(|r| r.labels());
        let mut groups = BTreeMap::new();
        for group in trials.iter().filter_map(|t| t.group.clone()) {
            groups.entry(group).or_insert(());
        }
        let groups = groups
            .into_keys()
            .map(|g| {
                let m = Metrics::from_trials(trials.iter().filter(|t| t.group.as_ref() == Some(&g)), labels.as_deref());
                (g, m)
            })
            .collect();
        let mut report = ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment_id: cfg.id.clone(),
            task: cfg.task,
            base_seed,
            trials_per_case: cfg.trials,
            seeds: jobs.iter().map(|j| j.2).collect(),
            map_id: setup.map.id().to_string(),
            metrics: Metrics::from_trials(&trials, labels.as_deref()),
            groups,
            trials,
            runtime_s: 0.0,
        };
        report.runtime_s = started.elapsed().as_secs_f64();
        if let Some(d) = dir {
            write_json(&d.join("report.json"), &report)?;
            write_runtime(d, report.runtime_s)?;
            let mut resolved = cfg.clone();
            resolved.base_seed = base_seed;
            fs::write(d.join("config.toml"), resolved.to_toml()?)?;
        }
        log::info!(
            "{}: {} trials in {:.2} s",
            cfg.id,
            report.trials.len(),
            report.runtime_s
        );
        Ok(report)
    })
}

/// Same scenarios and seeds through the FSA and an omnidirectional transmitter.
pub fn compare_antennas(cfg: &ExperimentConfig, out_dir: Option<&Path>, opts: &RunOptions) -> Result<ComparisonReport> {
    cfg.validate()?;
    if cfg.task != Task::Respiration {
        return Err(Error::config("task", "antenna comparison needs a respiration experiment"));
    }
    let started = Instant::now();
    let base_seed = opts.seed_override.unwrap_or(cfg.base_seed);
    let setup = cfg.antenna_setup()?;
    let jobs = seeds_of(cfg, base_seed);
    with_staging(out_dir, |dir| {
        let results = crate::par::map_slice(&jobs, |&(c, t, seed)| -> Result<ComparisonTrial> {
            let case = &cfg.cases[c];
            let scenario = trial_scenario(case, seed);
            let fsa_trace = synthesize(&scenario, setup.pattern.as_ref(), &setup.subcarrier_freqs)?;
            let omni_trace = omnidirectional_baseline(&scenario, &setup.subcarrier_freqs)?;
            let run = |trace: &CsiTrace| {
                multi_target_respiration(trace, &setup.map, &case.truth.directions, &cfg.respiration)
                    .map(|o| respiration_records(&o, case))
            };
            let fsa = run(&fsa_trace)?;
            let omni = run(&omni_trace)?;
            Ok(ComparisonTrial {
                case: case.label.clone(),
                trial: t,
                seed,
                fsa_error_bpm: trial_rate_error(&fsa),
                omni_error_bpm: trial_rate_error(&omni),
                fsa,
                omni,
            })
        });
        let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
        let mut report = ComparisonReport::summarize(&cfg.id, base_seed, trials);
        report.runtime_s = started.elapsed().as_secs_f64();
        if let Some(d) = dir {
            write_json(&d.join("comparison.json"), &report)?;
            write_runtime(d, report.runtime_s)?;
        }
        Ok(report)
    })
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n > 0.0).then(|| [v[0] / n, v[1] / n])
}

/// Copy of `cfg` with one parameter set to `value` in every case.
pub fn apply_sweep(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64) -> Result<ExperimentConfig> {
    let bad = |why: &str| Error::config("values", format!("{parameter} = {value}: {why}"));
    if !value.is_finite() {
        return Err(bad("must be finite"));
    }
    let mut out = cfg.clone();
    out.id = format!("{}-{parameter}-{value}", cfg.id);
    out.sweep = None;
    for case in &mut out.cases {
        let s = &mut case.scenario;
        let tx = s.geometry.tx_position;
        match parameter {
            SweepParameter::TargetDistance => {
                if value <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                let duration = s.duration;
                let g = s.geometry.clone();
                for t in &mut s.targets {
                    let reference = t.trajectory.reference_point(duration, tx);
                    let moved = g.point_at(g.relative_angle(reference), value);
                    t.trajectory.translate([moved[0] - reference[0], moved[1] - reference[1]]);
                }
            }
            SweepParameter::TransceiverSeparation => {
                if value <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                let mid = s.geometry.rx_midpoint();
                let dir = unit([mid[0] - tx[0], mid[1] - tx[1]]).ok_or_else(|| bad("receivers sit on the transmitter"))?;
                let shift = [tx[0] + dir[0] * value - mid[0], tx[1] + dir[1] * value - mid[1]];
                for rx in &mut s.geometry.rx_positions {
                    *rx = [rx[0] + shift[0], rx[1] + shift[1]];
                }
            }
            SweepParameter::NoiseSigma => {
                if value < 0.0 {
                    return Err(bad("must be >= 0"));
                }
                s.noise_sigma = Some(value);
                s.snr_db = None;
            }
            SweepParameter::TargetSpeed => {
                if value <= 0.0 {
                    return Err(bad("must be > 0"));
                }
                for t in &mut s.targets {
                    match &mut t.trajectory {
                        Trajectory::Linear { velocity, .. } => {
                            if let Some(u) = unit(*velocity) {
                                *velocity = [u[0] * value, u[1] * value];
                            }
                        }
                        // mean speed of a sinusoid is 4 * amplitude / period
                        Trajectory::Oscillation { amplitude, period, .. } => *period = 4.0 * *amplitude / value,
                        Trajectory::Waypoints { speed, .. } => *speed = value,
                        Trajectory::Breathing { .. } | Trajectory::Stationary { .. } => {}
                    }
                }
            }
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub metrics: Metrics,
    pub groups: BTreeMap<String, Metrics>,
}

/// One experiment per value with a shared base seed. Each run lands in
/// `<out>/<parameter>_<value>/`, with a `sweep.json` summary at the top.
pub fn sweep(
    cfg: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    out_dir: Option<&Path>,
    opts: &RunOptions,
) -> Result<Vec<ExperimentReport>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|&v| apply_sweep(cfg, parameter, v))
        .collect::<Result<Vec<_>>>()?;
    with_staging(out_dir, |dir| {
        let mut reports = Vec::with_capacity(values.len());
        for (cfg_v, &v) in configs.iter().zip(values) {
            let sub = dir.map(|d| d.join(format!("{parameter}_{v}")));
            reports.push(run_experiment(cfg_v, sub.as_deref(), opts)?);
        }
        if let Some(d) = dir {
            let points: Vec<SweepPoint> = reports
                .iter()
                .zip(values)
                .map(|(r, &value)| SweepPoint { value, metrics: r.metrics.clone(), groups: r.groups.clone() })
                .collect();
            #[derive(Serialize)]
            struct Summary<'a> {
                schema_version: u32,
                experiment_id: &'a str,
                parameter: String,
                points: Vec<SweepPoint>,
            }
            write_json(
                &d.join("sweep.json"),
                &Summary {
                    schema_version: REPORT_SCHEMA_VERSION,
                    experiment_id: &cfg.id,
                    parameter: parameter.to_string(),
                    points,
                },
            )?;
        }
        Ok(reports)
    })
}

/// Synthesizes the first `trials` traces of every case into `<out>/<case>/trial_NNN.csv`.
pub fn simulate(cfg: &ExperimentConfig, out_dir: &Path, trials: usize, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let base_seed = opts.seed_override.unwrap_or(cfg.base_seed);
    let setup = cfg.antenna_setup()?;
    with_staging(Some(out_dir), |dir| {
        let dir = dir.expect("staging dir");
        let mut written = Vec::new();
        for (c, case) in cfg.cases.iter().enumerate() {
            let case_dir = dir.join(sanitize(&case.label));
            fs::create_dir_all(&case_dir)?;
            for t in 0..trials.min(cfg.trials).max(1) {
                let scenario = trial_scenario(case, trial_seed(base_seed, c, t));
                let trace = synthesize(&scenario, setup.pattern.as_ref(), &setup.subcarrier_freqs)?;
                let name = format!("trial_{t:03}.csv");
                trace.save(case_dir.join(&name))?;
                written.push(out_dir.join(sanitize(&case.label)).join(name));
            }
        }
        setup.map.save(dir.join("map.csv"))?;
        Ok(written)
    })
}
