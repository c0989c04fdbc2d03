//! Experiment configs, presets, runs, sweeps and reports.

pub mod config;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{trial_seed, Case, ExperimentConfig, SweepParameter, SweepSpec, Task, Truth};
pub use presets::{preset, PRESET_NAMES};
pub use report::{ComparisonReport, ComparisonTrial, ConfusionMatrix, ExperimentReport, Metrics, RespirationRecord, TrialRecord};
pub use run::{apply_sweep, compare_antennas, run_experiment, simulate, sweep, trial_scenario, RunOptions};
