use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use fsa_sense::channel::CsiTrace;
use fsa_sense::dispersion::{build_frequency_angle_map, load_calibration, AntennaConfig, FrequencyAngleMap};
use fsa_sense::estimators::{multi_target_respiration, track_direction, write_estimates_csv, RespirationConfig};
use fsa_sense::harness::{
    compare_antennas, preset, run_experiment, simulate, sweep, ExperimentConfig, RunOptions, SweepParameter, Task,
    PRESET_NAMES,
};
use fsa_sense::pipeline::{csi_ratio, ssnr_profiles, write_profiles_csv, PipelineConfig};

#[derive(Parser)]
#[command(name = "fsa-sense", version, about = "Simulate and evaluate frequency-scanning antenna Wi-Fi sensing")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment config, TOML or JSON.
    #[arg(conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Use a built-in preset instead of a config file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,

    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Trials per case; overrides the config.
    #[arg(long)]
    trials: Option<usize>,

    /// Output directory.
    #[arg(long, env = "FSA_SENSE_OUT", default_value = "fsa-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize CSI traces for every case of an experiment.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Direction or region experiment, or direction tracking on a saved trace.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write each synthesized trace.
        #[arg(long)]
        emit_trace: bool,
        /// Track a recorded trace (CSV with its .meta.json sidecar) instead of simulating.
        #[arg(long, conflicts_with_all = ["config", "preset", "seed", "trials"])]
        trace: Option<PathBuf>,
        /// Frequency/angle calibration for --trace; defaults to the tuned antenna.
        #[arg(long, requires = "trace")]
        calibration: Option<PathBuf>,
        /// Minimum-variance level above which a window counts as empty.
        #[arg(long, default_value_t = 0.7, requires = "trace")]
        threshold: f64,
    },
    /// Respiration experiment, or breathing rates from a saved trace.
    Respiration {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        emit_trace: bool,
        #[arg(long, conflicts_with_all = ["config", "preset", "seed", "trials"], requires = "directions")]
        trace: Option<PathBuf>,
        #[arg(long, requires = "trace")]
        calibration: Option<PathBuf>,
        /// Directions in degrees for --trace, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        directions: Vec<f64>,
    },
    /// Same respiration scenarios through the FSA and an omnidirectional transmitter.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        emit_trace: bool,
        /// target_distance, transceiver_separation, noise_sigma or target_speed.
        #[arg(long)]
        parameter: Option<String>,
        /// Comma separated; defaults to the config's sweep section.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

/// Problem with the invocation rather than with the run.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_config(run: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&run.source.config, &run.source.preset) {
        (Some(path), _) => match ExperimentConfig::load(path) {
            Err(fsa_sense::Error::Io(e)) => {
                return Err(usage(format!("cannot read config {}: {e}", path.display())))
            }
            other => other?,
        },
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(usage("give a config file or --preset <name>")),
    };
    if let Some(trials) = run.trials {
        cfg.trials = trials;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn options(run: &RunArgs, emit_trace: bool) -> RunOptions {
    RunOptions { seed_override: run.seed, emit_trace }
}

fn require_task(cfg: &ExperimentConfig, allowed: &[Task], command: &str) -> anyhow::Result<()> {
    if !allowed.contains(&cfg.task) {
        return Err(usage(format!("`{command}` cannot run a {:?} experiment ({})", cfg.task, cfg.id)));
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn trace_map(trace: &CsiTrace, calibration: Option<&Path>) -> anyhow::Result<FrequencyAngleMap> {
    Ok(match calibration {
        Some(path) => load_calibration(path)?,
        None => build_frequency_angle_map(&AntennaConfig::tuned_default(), trace.subcarrier_freqs())?,
    })
}

fn load_trace(path: &Path) -> anyhow::Result<CsiTrace> {
    CsiTrace::load(path).with_context(|| format!("loading trace {}", path.display()))
}

fn estimate_trace(path: &Path, calibration: Option<&Path>, threshold: f64, out: &Path) -> anyhow::Result<()> {
    let trace = load_trace(path)?;
    let map = trace_map(&trace, calibration)?;
    let cfg = PipelineConfig::default();
    let profiles = ssnr_profiles(&csi_ratio(&trace)?, &cfg)?;
    let estimates = track_direction(&trace, &map, &cfg, threshold)?;
    fs::create_dir_all(out)?;
    write_profiles_csv(BufWriter::new(File::create(out.join("profiles.csv"))?), &profiles)?;
    write_estimates_csv(BufWriter::new(File::create(out.join("estimates.csv"))?), &estimates)?;
    let valid = estimates.iter().filter(|e| e.valid).count();
    println!("{} windows, {valid} with motion", estimates.len());
    if let Some(last) = estimates.iter().rev().find(|e| e.valid) {
        println!("last direction {:.2} deg", last.angle);
    }
    Ok(())
}

fn respiration_trace(path: &Path, calibration: Option<&Path>, directions: &[f64], out: &Path) -> anyhow::Result<()> {
    let trace = load_trace(path)?;
    let map = trace_map(&trace, calibration)?;
    let outcome = multi_target_respiration(&trace, &map, directions, &RespirationConfig::default())?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    fs::create_dir_all(out)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("respiration.json"))?), &outcome)?;
    print_json(&outcome.results)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Presets { name: None } => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
        Command::Presets { name: Some(name) } => print!("{}", preset(&name)?.to_toml()?),
        Command::Simulate { run } => {
            let cfg = load_config(&run)?;
            let written = simulate(&cfg, &run.out, cfg.trials, &options(&run, true))?;
            println!("{} traces written to {}", written.len(), run.out.display());
        }
        Command::Estimate { run, trace: Some(path), calibration, threshold, .. } => {
            estimate_trace(&path, calibration.as_deref(), threshold, &run.out)?;
        }
        Command::Estimate { run, emit_trace, .. } => {
            let cfg = load_config(&run)?;
            require_task(&cfg, &[Task::Direction, Task::Region], "estimate")?;
            let report = run_experiment(&cfg, Some(&run.out), &options(&run, emit_trace))?;
            print_json(&report.metrics)?;
        }
        Command::Respiration { run, trace: Some(path), calibration, directions, .. } => {
            respiration_trace(&path, calibration.as_deref(), &directions, &run.out)?;
        }
        Command::Respiration { run, emit_trace, directions, .. } => {
            if !directions.is_empty() {
                return Err(usage("--directions only applies with --trace; experiments take them from the config"));
            }
            let cfg = load_config(&run)?;
            require_task(&cfg, &[Task::Respiration], "respiration")?;
            let report = run_experiment(&cfg, Some(&run.out), &options(&run, emit_trace))?;
            print_json(&report.metrics)?;
        }
        Command::Compare { run } => {
            let cfg = load_config(&run)?;
            let report = compare_antennas(&cfg, Some(&run.out), &options(&run, false))?;
            println!(
                "fsa mae {} bpm, omni mae {} bpm, fsa better in {}/{} trials",
                report.fsa_mae_bpm.map_or("n/a".into(), |v| format!("{v:.3}")),
                report.omni_mae_bpm.map_or("n/a".into(), |v| format!("{v:.3}")),
                report.fsa_wins,
                report.trials.len()
            );
        }
        Command::Sweep { run, emit_trace, parameter, values } => {
            let cfg = load_config(&run)?;
            let (parameter, values) = match (parameter, cfg.sweep.clone()) {
                (Some(p), _) => (p.parse::<SweepParameter>()?, values),
                (None, Some(spec)) if values.is_empty() => (spec.parameter, spec.values),
                (None, Some(spec)) => (spec.parameter, values),
                (None, None) => bail!(usage("give --parameter; this config has no sweep section")),
            };
            let reports = sweep(&cfg, parameter, &values, Some(&run.out), &options(&run, emit_trace))?;
            for (v, r) in values.iter().zip(&reports) {
                let mae = r.metrics.angle_mae_deg.or(r.metrics.respiration_mae_bpm);
                println!("{parameter} = {v}: mae {}", mae.map_or("n/a".into(), |m| format!("{m:.3}")));
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<fsa_sense::Error>() {
        Some(e) if e.is_config_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
