use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::CsiTrace;
use crate::dispersion::FrequencyAngleMap;
use crate::error::{Error, Result};
use crate::pipeline::{csi_ratio, RatioTrace};

/// Plausible adult breathing rates, breaths per minute.
pub const BREATHING_BAND_BPM: (f64, f64) = (6.0, 30.0);
pub const MIN_WAVEFORM_S: f64 = 30.0;
pub const STATIC_WINDOW_S: f64 = 10.0;
/// Peak-to-median band power required to call a waveform breathing.
pub const DETECTION_RATIO: f64 = 3.0;
const WELCH_SEGMENT_S: f64 = 20.0;
const FILTER_TAPER_HZ: f64 = 0.05;
const RATE_ZERO_PAD: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespirationConfig {
    #[serde(default = "default_band")]
    pub band_bpm: (f64, f64),
    /// Directions closer than this trigger a warning.
    #[serde(default = "default_beamwidth")]
    pub beamwidth_deg: f64,
    /// A result whose rate is this close to a stronger one...
    #[serde(default = "default_leak_tolerance")]
    pub leakage_rate_tolerance_bpm: f64,
    /// ...and whose band SNR is at least this much lower is treated as sidelobe leakage.
    #[serde(default = "default_leak_gap")]
    pub leakage_snr_gap_db: f64,
}

fn default_band() -> (f64, f64) {
    BREATHING_BAND_BPM
}

fn default_beamwidth() -> f64 {
    15.0
}

fn default_leak_tolerance() -> f64 {
    1.0
}

fn default_leak_gap() -> f64 {
    10.0
}

impl Default for RespirationConfig {
    fn default() -> Self {
        Self {
            band_bpm: default_band(),
            beamwidth_deg: default_beamwidth(),
            leakage_rate_tolerance_bpm: default_leak_tolerance(),
            leakage_snr_gap_db: default_leak_gap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate_bpm: f64,
    pub peak_to_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespirationResult {
    /// Queried direction, degrees.
    pub direction: f64,
    pub subcarrier_index: Option<usize>,
    pub rate_bpm: Option<f64>,
    pub valid: bool,
    pub peak_to_median: Option<f64>,
    pub band_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip)]
    pub waveform: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RespirationOutcome {
    pub results: Vec<RespirationResult>,
    pub warnings: Vec<String>,
}

fn fft_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect()
}

/// Flat over `[lo, hi]` Hz with raised-cosine skirts outside the band.
fn band_mask(freq: f64, lo: f64, hi: f64) -> f64 {
    let f = freq.abs();
    if f >= lo && f <= hi {
        1.0
    } else {
        let gap = if f < lo { lo - f } else { f - hi };
        if gap >= FILTER_TAPER_HZ {
            0.0
        } else {
            0.5 + 0.5 * (PI * gap / FILTER_TAPER_HZ).cos()
        }
    }
}

fn bin_freq(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k * sample_rate / n as f64
}

/// Zero-phase band-pass by spectral masking.
pub fn bandpass(x: &[f64], sample_rate: f64, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spec = fft_real(x, n);
    for (k, z) in spec.iter_mut().enumerate() {
        *z *= band_mask(bin_freq(k, n, sample_rate), lo_hz, hi_hz);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|z| z.re / n as f64).collect()
}

/// Fraction of white-noise power that survives [`bandpass`].
fn bandpass_noise_fraction(n: usize, sample_rate: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    (0..n)
        .map(|k| band_mask(bin_freq(k, n, sample_rate), lo_hz, hi_hz).powi(2))
        .sum::<f64>()
        / n as f64
}

/// Centered moving average with the window clipped at the edges.
fn sliding_mean(x: &[Complex64], window: usize) -> Vec<Complex64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for v in x {
        let last = *prefix.last().unwrap();
        prefix.push(last + v);
    }
    let half = window / 2;
    (0..n)
        .map(|k| {
            let a = k.saturating_sub(half);
            let b = (k + half + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Projection onto the principal axis of the points in the I-Q plane.
fn principal_projection(x: &[Complex64]) -> Vec<f64> {
    let n = x.len().max(1) as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for z in x {
        sxx += z.re * z.re;
        syy += z.im * z.im;
        sxy += z.re * z.im;
    }
    let theta = 0.5 * (2.0 * sxy / n).atan2((sxx - syy) / n);
    let (s, c) = theta.sin_cos();
    x.iter().map(|z| z.re * c + z.im * s).collect()
}

/// Subcarrier whose map angle is nearest `direction`.
pub fn nearest_subcarrier(ratio: &RatioTrace, map: &FrequencyAngleMap, direction: f64) -> Result<usize> {
    let (lo, hi) = map.angle_span();
    if !(direction >= lo && direction <= hi) {
        return Err(Error::OutOfFov { value: direction, lo, hi });
    }
    ratio
        .subcarrier_freqs
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| map.angle_for_frequency(f).ok().map(|a| (i, (a - direction).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidInput("no subcarrier of the trace lies on the map".into()))
}

/// Complex ratio stream of one subcarrier, holding the last valid value over gaps.
fn filled_stream(ratio: &RatioTrace, sc: usize) -> Result<Vec<Complex64>> {
    let (values, valid) = ratio.stream(sc, 0, ratio.num_samples());
    let first = valid
        .iter()
        .position(|v| *v)
        .ok_or_else(|| Error::InsufficientData(format!("subcarrier {sc} has no valid samples")))?;
    let mut hold = values[first];
    Ok(values
        .iter()
        .zip(&valid)
        .map(|(z, ok)| {
            if *ok {
                hold = *z;
            }
            hold
        })
        .collect())
}

fn waveform_from_stream(stream: &[Complex64], sample_rate: f64, band_bpm: (f64, f64)) -> Vec<f64> {
    let window = (STATIC_WINDOW_S * sample_rate).round() as usize;
    let mean = sliding_mean(stream, window);
    let residual: Vec<Complex64> = stream.iter().zip(&mean).map(|(z, m)| z - m).collect();
    let projected = principal_projection(&residual);
    bandpass(&projected, sample_rate, band_bpm.0 / 60.0, band_bpm.1 / 60.0)
}

/// Breathing waveform seen by the subcarrier steered nearest `direction`.
pub fn extract_waveform(
    ratio: &RatioTrace,
    map: &FrequencyAngleMap,
    direction: f64,
    band_bpm: (f64, f64),
) -> Result<Vec<f64>> {
    let sc = nearest_subcarrier(ratio, map, direction)?;
    Ok(waveform_from_stream(&filled_stream(ratio, sc)?, ratio.sample_rate, band_bpm))
}

/// Averaged Hann-windowed periodogram with 50% overlap.
fn welch_psd(x: &[f64], segment: usize) -> Vec<f64> {
    let w = hann(segment);
    let hop = (segment / 2).max(1);
    let mut acc = vec![0.0; segment / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg: Vec<f64> = x[start..start + segment].iter().zip(&w).map(|(a, b)| a * b).collect();
        let spec = fft_real(&seg, segment);
        for (a, z) in acc.iter_mut().zip(&spec) {
            *a += z.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    acc.iter_mut().for_each(|a| *a /= count.max(1) as f64);
    acc
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Dominant breathing rate of a waveform.
///
/// Detection compares the Welch peak in the 6-30 bpm band with the band
/// median; the rate comes from a zero-padded Hann periodogram refined by
/// parabolic interpolation of log power.
pub fn respiration_rate(waveform: &[f64], sample_rate: f64) -> Result<RateEstimate> {
    respiration_rate_in_band(waveform, sample_rate, BREATHING_BAND_BPM)
}

pub fn respiration_rate_in_band(waveform: &[f64], sample_rate: f64, band_bpm: (f64, f64)) -> Result<RateEstimate> {
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput(format!("sample rate must be > 0, got {sample_rate}")));
    }
    let duration = waveform.len() as f64 / sample_rate;
    if duration < MIN_WAVEFORM_S {
        return Err(Error::InsufficientData(format!(
            "respiration needs >= {MIN_WAVEFORM_S} s of waveform, got {duration:.1} s"
        )));
    }
    let (lo, hi) = (band_bpm.0 / 60.0, band_bpm.1 / 60.0);

    let segment = ((WELCH_SEGMENT_S * sample_rate).round() as usize).min(waveform.len() / 3);
    let psd = welch_psd(waveform, segment);
    let band: Vec<usize> = (0..psd.len())
        .filter(|&k| {
            let f = k as f64 * sample_rate / segment as f64;
            f >= lo - 1e-9 && f <= hi + 1e-9
        })
        .collect();
    let mut band_power: Vec<f64> = band.iter().map(|&k| psd[k]).collect();
    let peak = band_power.iter().cloned().fold(0.0, f64::max);
    let med = median(&mut band_power);
    let peak_to_median = if med > 0.0 {
        peak / med
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !(peak_to_median >= DETECTION_RATIO) {
        return Err(Error::NoBreathingDetected { peak_to_median });
    }

    let n = waveform.len();
    let nfft = n.next_power_of_two() * RATE_ZERO_PAD;
    let windowed: Vec<f64> = waveform.iter().zip(hann(n)).map(|(a, b)| a * b).collect();
    let spec = fft_real(&windowed, nfft);
    let df = sample_rate / nfft as f64;
    let k_lo = (lo / df).ceil() as usize;
    let k_hi = ((hi / df).floor() as usize).min(nfft / 2 - 1);
    let power = |k: usize| spec[k].norm_sqr();
    let k = (k_lo..=k_hi)
        .max_by(|&a, &b| power(a).total_cmp(&power(b)))
        .ok_or_else(|| Error::InvalidInput("breathing band is narrower than one FFT bin".into()))?;
    let mut freq = k as f64 * df;
    if k > 0 {
        let (a, b, c) = (power(k - 1).ln(), power(k).ln(), power(k + 1).ln());
        let denom = a - 2.0 * b + c;
        if denom < 0.0 && denom.is_finite() {
            freq += 0.5 * (a - c) / denom * df;
        }
    }
    Ok(RateEstimate {
        rate_bpm: freq * 60.0,
        peak_to_median,
    })
}

/// Per-direction breathing rates from one trace. A failure in one direction
/// yields an invalid result rather than aborting the others.
pub fn multi_target_respiration(
    trace: &CsiTrace,
    map: &FrequencyAngleMap,
    directions: &[f64],
    cfg: &RespirationConfig,
) -> Result<RespirationOutcome> {
    let ratio = csi_ratio(trace)?;
    let mut warnings = Vec::new();
    for (i, a) in directions.iter().enumerate() {
        for (j, b) in directions.iter().enumerate().skip(i + 1) {
            if a == b {
                warnings.push(format!("direction {a} deg is listed twice (entries {i} and {j})"));
            } else if (a - b).abs() < cfg.beamwidth_deg {
                warnings.push(format!(
                    "directions {a} and {b} deg are closer than one beamwidth ({} deg)",
                    cfg.beamwidth_deg
                ));
            }
        }
    }

    let mut results: Vec<RespirationResult> = crate::par::map_slice(directions, |&direction| {
        respiration_for_direction(&ratio, map, direction, cfg)
    });

    // Sidelobe leakage: the same rhythm far weaker than in another direction.
    let snapshot: Vec<(bool, Option<f64>, Option<f64>)> =
        results.iter().map(|r| (r.valid, r.rate_bpm, r.band_snr_db)).collect();
    for (i, r) in results.iter_mut().enumerate() {
        let (Some(rate), Some(snr)) = (r.rate_bpm, r.band_snr_db) else { continue };
        if !r.valid {
            continue;
        }
        let leak = snapshot.iter().enumerate().find(|(j, (valid, other_rate, other_snr))| {
            *j != i
                && *valid
                && other_rate.is_some_and(|o| (o - rate).abs() <= cfg.leakage_rate_tolerance_bpm)
                && other_snr.is_some_and(|o| o - snr >= cfg.leakage_snr_gap_db)
        });
        if let Some((j, _)) = leak {
            r.valid = false;
            r.reason = Some(format!(
                "rhythm matches direction {} deg at much higher SNR (sidelobe leakage)",
                directions[j]
            ));
        }
    }
    Ok(RespirationOutcome { results, warnings })
}

fn respiration_for_direction(
    ratio: &RatioTrace,
    map: &FrequencyAngleMap,
    direction: f64,
    cfg: &RespirationConfig,
) -> RespirationResult {
    let mut result = RespirationResult {
        direction,
        subcarrier_index: None,
        rate_bpm: None,
        valid: false,
        peak_to_median: None,
        band_snr_db: None,
        reason: None,
        waveform: Vec::new(),
    };
    let sc = match nearest_subcarrier(ratio, map, direction) {
        Ok(sc) => sc,
        Err(e) => {
            result.reason = Some(e.to_string());
            return result;
        }
    };
    result.subcarrier_index = Some(sc);
    let stream = match filled_stream(ratio, sc) {
        Ok(s) => s,
        Err(e) => {
            result.reason = Some(e.to_string());
            return result;
        }
    };
    let waveform = waveform_from_stream(&stream, ratio.sample_rate, cfg.band_bpm);
    result.band_snr_db = Some(band_snr_db(&stream, &waveform, ratio.sample_rate, cfg.band_bpm));
    match respiration_rate_in_band(&waveform, ratio.sample_rate, cfg.band_bpm) {
        Ok(rate) => {
            result.rate_bpm = Some(rate.rate_bpm);
            result.peak_to_median = Some(rate.peak_to_median);
            result.valid = true;
        }
        Err(Error::NoBreathingDetected { peak_to_median }) => {
            result.peak_to_median = Some(peak_to_median);
            result.reason = Some("no breathing detected".into());
        }
        Err(e) => result.reason = Some(e.to_string()),
    }
    result.waveform = waveform;
    result
}

/// Waveform power over the white-noise power expected in the band. The noise
/// level comes from first differences, which the slow breathing signal barely
/// touches at CSI packet rates.
fn band_snr_db(stream: &[Complex64], waveform: &[f64], sample_rate: f64, band_bpm: (f64, f64)) -> f64 {
    let n = stream.len();
    if n < 2 {
        return f64::NAN;
    }
    let noise_complex = stream.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>() / (2.0 * (n - 1) as f64);
    let fraction = bandpass_noise_fraction(n, sample_rate, band_bpm.0 / 60.0, band_bpm.1 / 60.0);
    let noise_band = 0.5 * noise_complex * fraction;
    let signal = waveform.iter().map(|v| v * v).sum::<f64>() / waveform.len().max(1) as f64;
    10.0 * (signal / noise_band.max(f64::MIN_POSITIVE)).log10()
}
