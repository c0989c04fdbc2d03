//! CSI-ratio offset cancellation, multi-interval TD-CSI and phase-stability
//! profiling.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::CsiTrace;
use crate::error::{Error, Result};

/// Denominators weaker than this fraction of the trace RMS are flagged invalid.
pub const RATIO_FLOOR: f64 = 1e-9;

/// Per-(time, subcarrier) ratio `H_rx0 / H_rx1` with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTrace {
    pub timestamps: Vec<f64>,
    pub subcarrier_freqs: Vec<f64>,
    pub sample_rate: f64,
    /// Index `t * subcarriers + sc`. Invalid entries hold zero.
    pub values: Vec<Complex64>,
    pub valid: Vec<bool>,
}

impl RatioTrace {
    pub fn num_samples(&self) -> usize {
        self.timestamps.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarrier_freqs.len()
    }

    pub fn get(&self, t: usize, sc: usize) -> Option<Complex64> {
        let i = t * self.subcarrier_freqs.len() + sc;
        self.valid[i].then(|| self.values[i])
    }

    /// Samples of one subcarrier over `[start, end)` and their validity.
    pub fn stream(&self, sc: usize, start: usize, end: usize) -> (Vec<Complex64>, Vec<bool>) {
        let n = self.subcarrier_freqs.len();
        (start..end)
            .map(|t| (self.values[t * n + sc], self.valid[t * n + sc]))
            .unzip()
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

pub fn csi_ratio(trace: &CsiTrace) -> Result<RatioTrace> {
    if trace.num_rx() < 2 {
        return Err(Error::Unsupported(format!(
            "CSI ratio needs two receive streams, trace has {}",
            trace.num_rx()
        )));
    }
    let samples = trace.samples();
    let rms = if samples.is_empty() {
        0.0
    } else {
        (samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64).sqrt()
    };
    let floor = RATIO_FLOOR * rms;
    let nsc = trace.num_subcarriers();
    let mut values = Vec::with_capacity(trace.num_samples() * nsc);
    let mut valid = Vec::with_capacity(values.capacity());
    for t in 0..trace.num_samples() {
        for sc in 0..nsc {
            let den = trace.get(t, sc, 1);
            let power = den.norm_sqr();
            if power > floor * floor && power > 0.0 {
                values.push(trace.get(t, sc, 0) / den);
                valid.push(true);
            } else {
                values.push(Complex64::new(0.0, 0.0));
                valid.push(false);
            }
        }
    }
    Ok(RatioTrace {
        timestamps: trace.timestamps().to_vec(),
        subcarrier_freqs: trace.subcarrier_freqs().to_vec(),
        sample_rate: trace.sample_rate(),
        values,
        valid,
    })
}

/// `out[k] = series[k + lag] - series[k]`.
pub fn td_csi(series: &[Complex64], lag: usize) -> Result<Vec<Complex64>> {
    if lag == 0 {
        return Err(Error::InvalidInput("TD-CSI lag must be >= 1 sample".into()));
    }
    if series.len() <= lag {
        return Err(Error::InsufficientData(format!(
            "series of {} samples is too short for lag {lag}",
            series.len()
        )));
    }
    Ok(series.iter().zip(&series[lag..]).map(|(a, b)| b - a).collect())
}

/// Circular variance of successive phase differences, `1 - |mean exp(jΔψ)|`.
pub fn phase_stability(td: &[Complex64]) -> Result<f64> {
    phase_stability_masked(td, None)
}

/// As [`phase_stability`], skipping samples that are masked out or exactly zero.
/// Differences are taken between consecutive surviving samples.
pub fn phase_stability_masked(td: &[Complex64], mask: Option<&[bool]>) -> Result<f64> {
    let mut acc = StabilityAccumulator::default();
    for (k, z) in td.iter().enumerate() {
        if mask.is_none_or(|m| m[k]) {
            acc.push(*z);
        }
    }
    acc.finish()
}

/// Running resultant of unit phase steps between consecutive usable samples.
#[derive(Default)]
struct StabilityAccumulator {
    sum: Complex64,
    prev: Option<Complex64>,
    used: usize,
    steps: usize,
}

impl StabilityAccumulator {
    #[inline]
    fn push(&mut self, z: Complex64) {
        let power = z.norm_sqr();
        if !(power > 0.0 && power.is_finite()) {
            return;
        }
        self.used += 1;
        if let Some(p) = self.prev {
            let step = z * p.conj();
            let mag = step.norm_sqr().sqrt();
            if mag > 0.0 && mag.is_finite() {
                self.sum += step / mag;
                self.steps += 1;
            }
        }
        self.prev = Some(z);
    }

    fn finish(&self) -> Result<f64> {
        if self.used < 3 || self.steps == 0 {
            return Err(Error::InsufficientData(format!(
                "phase stability needs >= 3 valid samples, got {}",
                self.used
            )));
        }
        Ok((1.0 - self.sum.norm() / self.steps as f64).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// TD-CSI lags in seconds.
    #[serde(default = "default_intervals")]
    pub intervals: Vec<f64>,
    #[serde(default = "default_window_length")]
    pub window_length: f64,
    #[serde(default = "default_window_hop")]
    pub window_hop: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_intervals() -> Vec<f64> {
    (1..=20).map(|k| 0.005 * k as f64).collect()
}

fn default_window_length() -> f64 {
    1.0
}

fn default_window_hop() -> f64 {
    0.5
}

fn default_epsilon() -> f64 {
    1e-12
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            intervals: default_intervals(),
            window_length: default_window_length(),
            window_hop: default_window_hop(),
            epsilon: default_epsilon(),
        }
    }
}

impl PipelineConfig {
    pub fn with_intervals(intervals: Vec<f64>) -> Self {
        Self {
            intervals,
            ..Self::default()
        }
    }

    fn whole_samples(value: f64, sample_rate: f64) -> Option<usize> {
        let n = value * sample_rate;
        let r = n.round();
        ((n - r).abs() <= 1e-6 * r.max(1.0) && r >= 1.0).then_some(r as usize)
    }

    /// Lags in samples; fails unless each is a positive whole number of periods.
    pub fn interval_samples(&self, sample_rate: f64) -> Result<Vec<usize>> {
        self.intervals
            .iter()
            .enumerate()
            .map(|(i, &dt)| {
                Self::whole_samples(dt, sample_rate).ok_or_else(|| {
                    Error::config(
                        format!("pipeline.intervals[{i}]"),
                        format!("{dt} s is not a positive multiple of the {} s sample period", 1.0 / sample_rate),
                    )
                })
            })
            .collect()
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(Error::config("pipeline.intervals", "at least one interval is required"));
        }
        let lags = self.interval_samples(sample_rate)?;
        if !(self.window_hop > 0.0) {
            return Err(Error::config("pipeline.window_hop", "must be > 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("pipeline.epsilon", "must be > 0"));
        }
        let max_dt = self.intervals.iter().cloned().fold(0.0, f64::max);
        if !(self.window_length >= 2.0 * max_dt) {
            return Err(Error::config(
                "pipeline.window_length",
                format!("must be at least twice the longest interval ({max_dt} s)"),
            ));
        }
        let window = (self.window_length * sample_rate).round() as usize;
        let longest = lags.iter().copied().max().unwrap_or(0);
        if window < longest + 3 {
            return Err(Error::config("pipeline.window_length", "window too short for the interval set"));
        }
        Ok(())
    }
}

/// Phase-stability profile of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsnrProfile {
    pub window_start: f64,
    pub subcarrier_freqs: Vec<f64>,
    /// NaN where the subcarrier is invalid.
    pub mean_circular_variance: Vec<f64>,
    pub ssnr_score: Vec<f64>,
    pub valid: Vec<bool>,
}

impl SsnrProfile {
    pub fn len(&self) -> usize {
        self.subcarrier_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subcarrier_freqs.is_empty()
    }

    fn from_variances(window_start: f64, freqs: Vec<f64>, variances: Vec<Option<f64>>, epsilon: f64) -> Self {
        let valid: Vec<bool> = variances.iter().map(Option::is_some).collect();
        let mean_circular_variance: Vec<f64> = variances.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let ssnr_score = mean_circular_variance
            .iter()
            .map(|&v| if v.is_nan() { f64::NAN } else { ssnr_score(v, epsilon) })
            .collect();
        Self {
            window_start,
            subcarrier_freqs: freqs,
            mean_circular_variance,
            ssnr_score,
            valid,
        }
    }

    /// Valid subcarrier with the lowest variance (lowest index on ties).
    pub fn best_subcarrier(&self) -> Option<usize> {
        (0..self.len())
            .filter(|&i| self.valid[i])
            .min_by(|&a, &b| {
                self.mean_circular_variance[a]
                    .total_cmp(&self.mean_circular_variance[b])
                    .then(a.cmp(&b))
            })
    }
}

pub fn ssnr_score(mean_circular_variance: f64, epsilon: f64) -> f64 {
    -(epsilon + mean_circular_variance).log10()
}

fn window_samples(ratio: &RatioTrace, cfg: &PipelineConfig) -> usize {
    (cfg.window_length * ratio.sample_rate).round() as usize
}

fn subcarrier_variance(ratio: &RatioTrace, sc: usize, start: usize, end: usize, lags: &[usize]) -> Option<f64> {
    let (series, mask) = ratio.stream(sc, start, end);
    let mut total = 0.0;
    let mut count = 0usize;
    for &lag in lags {
        if series.len() <= lag {
            continue;
        }
        // fused td_csi + phase_stability_masked
        let mut acc = StabilityAccumulator::default();
        for k in 0..series.len() - lag {
            if mask[k] && mask[k + lag] {
                acc.push(series[k + lag] - series[k]);
            }
        }
        if let Ok(v) = acc.finish() {
            total += v;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Profile of the window beginning at `window_start` seconds.
pub fn ssnr_profile(ratio: &RatioTrace, cfg: &PipelineConfig, window_start: f64) -> Result<SsnrProfile> {
    cfg.validate(ratio.sample_rate)?;
    let lags = cfg.interval_samples(ratio.sample_rate)?;
    let len = window_samples(ratio, cfg);
    let start = (window_start * ratio.sample_rate).round();
    if start < 0.0 || start as usize + len > ratio.num_samples() {
        return Err(Error::InsufficientData(format!(
            "window [{window_start}, {}) s does not fit in a {} s trace",
            window_start + cfg.window_length,
            ratio.num_samples() as f64 / ratio.sample_rate
        )));
    }
    Ok(profile_at(ratio, cfg, &lags, start as usize, len))
}

fn profile_at(ratio: &RatioTrace, cfg: &PipelineConfig, lags: &[usize], start: usize, len: usize) -> SsnrProfile {
    let variances = (0..ratio.num_subcarriers())
        .map(|sc| subcarrier_variance(ratio, sc, start, start + len, lags))
        .collect();
    SsnrProfile::from_variances(
        start as f64 / ratio.sample_rate,
        ratio.subcarrier_freqs.clone(),
        variances,
        cfg.epsilon,
    )
}

/// Profiles for every full window at the configured hop.
pub fn ssnr_profiles(ratio: &RatioTrace, cfg: &PipelineConfig) -> Result<Vec<SsnrProfile>> {
    cfg.validate(ratio.sample_rate)?;
    let lags = cfg.interval_samples(ratio.sample_rate)?;
    let len = window_samples(ratio, cfg);
    let hop = ((cfg.window_hop * ratio.sample_rate).round() as usize).max(1);
    if ratio.num_samples() < len {
        return Err(Error::InsufficientData(format!(
            "trace of {} samples is shorter than one {len}-sample window",
            ratio.num_samples()
        )));
    }
    let starts: Vec<usize> = (0..=(ratio.num_samples() - len) / hop).map(|i| i * hop).collect();
    Ok(crate::par::map_slice(&starts, |&s| profile_at(ratio, cfg, &lags, s, len)))
}

/// Mean variance per subcarrier across windows, ignoring invalid entries.
pub fn aggregate_profiles(profiles: &[SsnrProfile], epsilon: f64) -> Result<SsnrProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::InsufficientData("no profiles to aggregate".into()))?;
    let n = first.len();
    if profiles.iter().any(|p| p.subcarrier_freqs != first.subcarrier_freqs) {
        return Err(Error::InvalidInput("profiles use different subcarrier grids".into()));
    }
    let variances = (0..n)
        .map(|sc| {
            let vals: Vec<f64> = profiles
                .iter()
                .filter(|p| p.valid[sc])
                .map(|p| p.mean_circular_variance[sc])
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    Ok(SsnrProfile::from_variances(
        first.window_start,
        first.subcarrier_freqs.clone(),
        variances,
        epsilon,
    ))
}

pub fn write_profiles_csv<W: Write>(writer: W, profiles: &[SsnrProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_start", "subcarrier_index", "freq_hz", "mean_circ_variance", "ssnr_score"])?;
    for p in profiles {
        for sc in 0..p.len() {
            w.write_record(&[
                p.window_start.to_string(),
                sc.to_string(),
                p.subcarrier_freqs[sc].to_string(),
                p.mean_circular_variance[sc].to_string(),
                p.ssnr_score[sc].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
