use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispersion::{
    build_frequency_angle_map, default_subcarriers, load_calibration, AntennaConfig, ArrayFactorPattern,
    BeamPattern, FrequencyAngleMap, SteeredArrayPattern, DEFAULT_ELEMENT_SPACING_M, DEFAULT_NUM_ELEMENTS,
};
use crate::error::{Error, Result};
use crate::estimators::{ClassificationRule, RegionSpec, RespirationConfig};
use crate::pipeline::PipelineConfig;
use crate::scene::Scenario;

pub const DEFAULT_NO_MOTION_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// One angle per trial from the window-averaged profile.
    Direction,
    /// Per-direction breathing rates.
    Respiration,
    /// Sector label from per-window direction estimates.
    Region,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    /// Expected breathing rates, one per entry of `directions`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rates_bpm: Vec<f64>,
    /// Directions queried for respiration, degrees.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub directions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub label: String,
    /// Aggregation key for per-group metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub scenario: Scenario,
    #[serde(default)]
    pub truth: Truth,
    /// Radius of a uniform random shift applied to every target per trial.
    #[serde(default)]
    pub start_jitter_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TargetDistance,
    TransceiverSeparation,
    NoiseSigma,
    TargetSpeed,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target_distance" => Ok(Self::TargetDistance),
            "transceiver_separation" => Ok(Self::TransceiverSeparation),
            "noise_sigma" => Ok(Self::NoiseSigma),
            "target_speed" => Ok(Self::TargetSpeed),
            other => Err(Error::config(
                "parameter",
                format!(
                    "unknown sweep parameter `{other}` (expected target_distance, transceiver_separation, noise_sigma or target_speed)"
                ),
            )),
        }
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TargetDistance => "target_distance",
            Self::TransceiverSeparation => "transceiver_separation",
            Self::NoiseSigma => "noise_sigma",
            Self::TargetSpeed => "target_speed",
        })
    }
}

/// Default sweep for configs that describe a parameter study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub task: Task,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Synthetic antenna; defaults to the tuned 60° design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antenna: Option<AntennaConfig>,
    /// Measured frequency/angle calibration CSV; overrides `antenna`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[serde(default = "default_num_subcarriers")]
    pub num_subcarriers: usize,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default = "default_threshold")]
    pub no_motion_threshold: f64,
    #[serde(default)]
    pub respiration: RespirationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSpec>,
    #[serde(default)]
    pub region_rule: ClassificationRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub cases: Vec<Case>,
}

fn default_trials() -> usize {
    10
}

fn default_num_subcarriers() -> usize {
    64
}

fn default_threshold() -> f64 {
    DEFAULT_NO_MOTION_THRESHOLD
}

/// Antenna model resolved from a config: the map used by the estimators and
/// the pattern used for synthesis.
pub struct AntennaSetup {
    pub map: FrequencyAngleMap,
    pub subcarrier_freqs: Vec<f64>,
    pub pattern: Box<dyn BeamPattern>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`. Errors name the
    /// offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de)
                .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?
        } else {
            let value: toml::Value =
                toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
            serde_path_to_error::deserialize(value)
                .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(cal), Some(dir)) = (&cfg.calibration, path.parent()) {
            if cal.is_relative() {
                cfg.calibration = Some(dir.join(cal));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidInput(format!("cannot render config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::config("id", "must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.num_subcarriers < 2 {
            return Err(Error::config("num_subcarriers", "must be >= 2"));
        }
        if !(self.no_motion_threshold > 0.0 && self.no_motion_threshold <= 1.0) {
            return Err(Error::config("no_motion_threshold", "must be in (0, 1]"));
        }
        if let Some(a) = &self.antenna {
            a.validate().map_err(|e| Error::config("antenna", e.to_string()))?;
        }
        if self.cases.is_empty() {
            return Err(Error::config("cases", "at least one case is required"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "must not be empty"));
            }
        }
        if self.task == Task::Region {
            let regions = self
                .regions
                .as_ref()
                .ok_or_else(|| Error::config("regions", "region tasks need a sector list"))?;
            regions.validate(None)?;
        }
        for (i, case) in self.cases.iter().enumerate() {
            let at = |field: &str| format!("cases[{i}].{field}");
            if case.label.trim().is_empty() {
                return Err(Error::config(at("label"), "must not be empty"));
            }
            if !(case.start_jitter_m >= 0.0 && case.start_jitter_m.is_finite()) {
                return Err(Error::config(at("start_jitter_m"), "must be >= 0"));
            }
            if let Err(e) = case.scenario.validate(None) {
                return Err(match e {
                    Error::InvalidScenario(list) => Error::config(at("scenario"), list.join("; ")),
                    other => other,
                });
            }
            match self.task {
                Task::Direction => {
                    if case.truth.angle_deg.is_none() {
                        return Err(Error::config(at("truth.angle_deg"), "direction tasks need a true angle"));
                    }
                    if case.scenario.targets.is_empty() {
                        return Err(Error::config(at("scenario.targets"), "direction tasks need a target"));
                    }
                }
                Task::Region => {
                    let label = case
                        .truth
                        .region
                        .as_ref()
                        .ok_or_else(|| Error::config(at("truth.region"), "region tasks need a true region"))?;
                    let regions = self.regions.as_ref().expect("checked above");
                    if !regions.sectors.iter().any(|s| &s.label == label) {
                        return Err(Error::config(at("truth.region"), format!("unknown region `{label}`")));
                    }
                }
                Task::Respiration => {
                    if case.truth.directions.is_empty() {
                        return Err(Error::config(at("truth.directions"), "respiration tasks need directions"));
                    }
                    if !case.truth.rates_bpm.is_empty() && case.truth.rates_bpm.len() != case.truth.directions.len()
                    {
                        return Err(Error::config(
                            at("truth.rates_bpm"),
                            "must list one rate per direction (or none for empty scenes)",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn antenna_setup(&self) -> Result<AntennaSetup> {
        if let Some(path) = &self.calibration {
            let map = load_calibration(path)?;
            let (lo, hi) = map.frequency_span();
            let subcarrier_freqs = crate::dispersion::subcarrier_frequencies(self.num_subcarriers, lo, hi);
            let pattern = SteeredArrayPattern::new(map.clone(), DEFAULT_NUM_ELEMENTS, DEFAULT_ELEMENT_SPACING_M);
            return Ok(AntennaSetup {
                map,
                subcarrier_freqs,
                pattern: Box::new(pattern),
            });
        }
        let antenna = self.antenna.clone().unwrap_or_else(AntennaConfig::tuned_default);
        let subcarrier_freqs = default_subcarriers(self.num_subcarriers);
        let map = build_frequency_angle_map(&antenna, &subcarrier_freqs)?;
        Ok(AntennaSetup {
            map,
            subcarrier_freqs,
            pattern: Box::new(ArrayFactorPattern::new(antenna)),
        })
    }
}

/// Deterministic per-trial seed.
pub fn trial_seed(base_seed: u64, case: usize, trial: usize) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(splitmix64(splitmix64(base_seed) ^ case as u64) ^ trial as u64)
}
