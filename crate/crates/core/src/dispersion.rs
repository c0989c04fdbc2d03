//! Dispersion physics of the coupled-resonator frequency-scanning antenna.
//!
//! Every element adds a frequency-dependent phase delay; the progressive
//! phase across the array steers the main beam, so each subcarrier leaves
//! the antenna toward its own direction. Angles are in degrees, measured from
//! boresight, counterclockwise positive.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wi-Fi channel 114 (160 MHz).
pub const BAND_START_HZ: f64 = 5.49e9;
pub const BAND_END_HZ: f64 = 5.65e9;

pub const DEFAULT_RESONANT_FREQ_HZ: f64 = 5.57e9;
pub const DEFAULT_NUM_ELEMENTS: usize = 12;
/// 17.4 cm aperture over 12 resonators.
pub const DEFAULT_ELEMENT_SPACING_M: f64 = 0.0145;
pub const DEFAULT_FOV_DEG: f64 = 60.0;

/// Angle grid step used when tabulating beam patterns.
pub const PATTERN_GRID_STEP_DEG: f64 = 0.1;

pub fn wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaConfig {
    pub num_elements: usize,
    /// Element pitch in meters.
    pub element_spacing: f64,
    /// Resonant frequency f₀ in Hz.
    pub resonant_freq: f64,
    pub quality_factor: f64,
    /// Residual coupling imbalance, radians per Hz of offset from f₀.
    #[serde(default)]
    pub coupling_asymmetry: f64,
}

impl AntennaConfig {
    pub fn new(
        num_elements: usize,
        element_spacing: f64,
        resonant_freq: f64,
        quality_factor: f64,
    ) -> Result<Self> {
        let cfg = Self {
            num_elements,
            element_spacing,
            resonant_freq,
            quality_factor,
            coupling_asymmetry: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_coupling_asymmetry(mut self, rad_per_hz: f64) -> Self {
        self.coupling_asymmetry = rad_per_hz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_elements < 2 {
            problems.push(format!("num_elements must be >= 2, got {}", self.num_elements));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            problems.push(format!("element_spacing must be > 0, got {}", self.element_spacing));
        }
        if !(self.resonant_freq > 0.0 && self.resonant_freq.is_finite()) {
            problems.push(format!("resonant_freq must be > 0, got {}", self.resonant_freq));
        }
        if !(self.quality_factor >= 0.0 && self.quality_factor.is_finite()) {
            problems.push(format!("quality_factor must be >= 0, got {}", self.quality_factor));
        }
        if !self.coupling_asymmetry.is_finite() {
            problems.push("coupling_asymmetry must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }

    /// Default 12-element prototype geometry with Q solved so the 160 MHz
    /// channel spans a 60° field of view.
    pub fn tuned_default() -> Self {
        static TUNED: OnceLock<AntennaConfig> = OnceLock::new();
        TUNED
            .get_or_init(|| {
                let base = AntennaConfig {
                    num_elements: DEFAULT_NUM_ELEMENTS,
                    element_spacing: DEFAULT_ELEMENT_SPACING_M,
                    resonant_freq: DEFAULT_RESONANT_FREQ_HZ,
                    quality_factor: 0.0,
                    coupling_asymmetry: 0.0,
                };
                base.tune_quality_factor(BAND_START_HZ, BAND_END_HZ, DEFAULT_FOV_DEG)
                    .expect("default geometry reaches a 60 degree field of view")
            })
            .clone()
    }

    /// Bisects the quality factor so that `beam_direction(f_hi) - beam_direction(f_lo)`
    /// equals `span_deg`. The span grows monotonically with Q until either band
    /// edge stops radiating a main beam.
    pub fn tune_quality_factor(&self, f_lo: f64, f_hi: f64, span_deg: f64) -> Result<Self> {
        if !(f_lo > 0.0 && f_hi > f_lo) {
            return Err(Error::InvalidInput(format!("bad band [{f_lo}, {f_hi}]")));
        }
        if !(span_deg > 0.0 && span_deg < 180.0) {
            return Err(Error::InvalidInput(format!("span must be in (0, 180), got {span_deg}")));
        }
        let span_at = |q: f64| -> Option<f64> {
            let cfg = AntennaConfig {
                quality_factor: q,
                ..self.clone()
            };
            let lo = beam_direction(f_lo, &cfg).ok()?;
            let hi = beam_direction(f_hi, &cfg).ok()?;
            Some(hi - lo)
        };

        // Grow an upper bracket until the target span is exceeded or the band
        // edges fall out of scan range.
        let mut q_lo = 0.0;
        let mut q_hi = 1.0;
        loop {
            match span_at(q_hi) {
                Some(s) if s >= span_deg => break,
                Some(_) => {
                    q_lo = q_hi;
                    q_hi *= 2.0;
                    if q_hi > 1e7 {
                        return Err(Error::InvalidInput(format!(
                            "no quality factor reaches a {span_deg} degree span"
                        )));
                    }
                }
                None => break,
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (q_lo + q_hi);
            match span_at(mid) {
                Some(s) if s < span_deg => q_lo = mid,
                _ => q_hi = mid,
            }
        }
        match span_at(q_lo) {
            Some(s) if (s - span_deg).abs() < 1e-6 => Ok(AntennaConfig {
                quality_factor: q_lo,
                ..self.clone()
            }),
            _ => Err(Error::InvalidInput(format!(
                "no quality factor reaches a {span_deg} degree span"
            ))),
        }
    }
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self::tuned_default()
    }
}

fn check_freq(f: f64) -> Result<()> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("frequency must be positive, got {f}")))
    }
}

/// Phase delay of a single resonator patch: `atan(Q (f₀/f - f/f₀))`.
pub fn resonator_phase(freq_hz: f64, cfg: &AntennaConfig) -> Result<f64> {
    check_freq(freq_hz)?;
    let f0 = cfg.resonant_freq;
    Ok((cfg.quality_factor * (f0 / freq_hz - freq_hz / f0)).atan())
}

/// Per-element phase step: resonator phase plus the linear coupling-imbalance term.
pub fn element_phase(freq_hz: f64, cfg: &AntennaConfig) -> Result<f64> {
    let resonance = resonator_phase(freq_hz, cfg)?;
    Ok(resonance + cfg.coupling_asymmetry * (freq_hz - cfg.resonant_freq))
}

fn steering_argument(freq_hz: f64, cfg: &AntennaConfig) -> Result<f64> {
    let step = element_phase(freq_hz, cfg)?;
    Ok(-wavelength(freq_hz) * step / (2.0 * PI * cfg.element_spacing))
}

/// Main-beam direction in degrees.
pub fn beam_direction(freq_hz: f64, cfg: &AntennaConfig) -> Result<f64> {
    let arg = steering_argument(freq_hz, cfg)?;
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::OutOfScanRange {
            freq_hz,
            argument: arg,
        });
    }
    Ok(arg.asin().to_degrees())
}

/// Normalized uniform-array factor |Σₙ exp(j n ψ)| / N for a per-element phase
/// step ψ, evaluated through the Dirichlet closed form.
pub fn dirichlet_gain(phase_step: f64, num_elements: usize) -> f64 {
    let n = num_elements as f64;
    let half = 0.5 * phase_step;
    let den = n * half.sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    ((n * half).sin() / den).abs().min(1.0)
}

/// Array-factor gain of the FSA at `freq_hz` toward `angle_deg`, in [0, 1].
pub fn array_factor(freq_hz: f64, angle_deg: f64, cfg: &AntennaConfig) -> Result<f64> {
    let step = element_phase(freq_hz, cfg)?;
    let psi = step + 2.0 * PI * cfg.element_spacing * angle_deg.to_radians().sin() / wavelength(freq_hz);
    Ok(dirichlet_gain(psi, cfg.num_elements))
}

/// `n` subcarrier frequencies uniformly spanning `[start, end]` inclusive.
pub fn subcarrier_frequencies(n: usize, start_hz: f64, end_hz: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (start_hz + end_hz)],
        _ => (0..n)
            .map(|i| start_hz + (end_hz - start_hz) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn default_subcarriers(n: usize) -> Vec<f64> {
    subcarrier_frequencies(n, BAND_START_HZ, BAND_END_HZ)
}

// ---------------------------------------------------------------------------
// Frequency/angle map

/// Calibrated subcarrier-frequency to beam-angle bijection, interpolated
/// piecewise-linearly between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAngleMap {
    id: String,
    freqs: Vec<f64>,
    angles: Vec<f64>,
}

impl FrequencyAngleMap {
    pub fn new(id: impl Into<String>, entries: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (freqs, angles): (Vec<f64>, Vec<f64>) = entries.into_iter().unzip();
        if freqs.is_empty() {
            return Err(Error::InvalidInput("frequency/angle map needs at least one entry".into()));
        }
        for (i, (&f, &a)) in freqs.iter().zip(&angles).enumerate() {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidInput(format!("entry {i}: frequency {f} must be positive")));
            }
            if !(a > -90.0 && a < 90.0) {
                return Err(Error::InvalidInput(format!("entry {i}: angle {a} outside (-90, 90)")));
            }
        }
        for i in 1..freqs.len() {
            if freqs[i] <= freqs[i - 1] {
                return Err(Error::InvalidInput(format!(
                    "entry {i}: frequencies must be strictly increasing"
                )));
            }
        }
        if angles.len() > 1 {
            let rising = angles[1] > angles[0];
            for i in 1..angles.len() {
                let ok = if rising {
                    angles[i] > angles[i - 1]
                } else {
                    angles[i] < angles[i - 1]
                };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "entry {i}: angles must be strictly monotonic in frequency"
                    )));
                }
            }
        }
        Ok(Self {
            id: id.into(),
            freqs,
            angles,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs.iter().copied().zip(self.angles.iter().copied())
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn frequency_span(&self) -> (f64, f64) {
        (self.freqs[0], self.freqs[self.freqs.len() - 1])
    }

    /// (min, max) beam angle over the map.
    pub fn angle_span(&self) -> (f64, f64) {
        let a = self.angles[0];
        let b = self.angles[self.angles.len() - 1];
        (a.min(b), a.max(b))
    }

    pub fn field_of_view(&self) -> f64 {
        let (lo, hi) = self.angle_span();
        hi - lo
    }

    pub fn angle_for_frequency(&self, freq_hz: f64) -> Result<f64> {
        interpolate(&self.freqs, &self.angles, freq_hz)
    }

    pub fn frequency_for_angle(&self, angle_deg: f64) -> Result<f64> {
        if self.angles.len() > 1 && self.angles[1] < self.angles[0] {
            let a: Vec<f64> = self.angles.iter().rev().copied().collect();
            let f: Vec<f64> = self.freqs.iter().rev().copied().collect();
            interpolate(&a, &f, angle_deg)
        } else {
            interpolate(&self.angles, &self.freqs, angle_deg)
        }
    }

    /// Beam angle of every frequency in `freqs`; fails on the first frequency
    /// outside the map's span.
    pub fn angles_for(&self, freqs: &[f64]) -> Result<Vec<f64>> {
        freqs.iter().map(|&f| self.angle_for_frequency(f)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency_hz", "angle_deg"])?;
        for (f, a) in self.entries() {
            w.write_record([f.to_string(), a.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Linear interpolation over strictly increasing `xs`.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let lo = xs[0];
    let hi = xs[xs.len() - 1];
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfFov { value: x, lo, hi });
    }
    let idx = xs.partition_point(|&v| v < x);
    if idx < xs.len() && xs[idx] == x {
        return Ok(ys[idx]);
    }
    // idx >= 1 here since x > xs[0]
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Beam direction of every subcarrier under `cfg`.
pub fn build_frequency_angle_map(cfg: &AntennaConfig, subcarrier_freqs: &[f64]) -> Result<FrequencyAngleMap> {
    cfg.validate()?;
    if subcarrier_freqs.is_empty() {
        return Err(Error::InvalidInput("no subcarrier frequencies".into()));
    }
    for w in subcarrier_freqs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput("subcarrier frequencies must be strictly increasing".into()));
        }
    }
    let mut entries = Vec::with_capacity(subcarrier_freqs.len());
    let mut offenders = Vec::new();
    for &f in subcarrier_freqs {
        match beam_direction(f, cfg) {
            Ok(a) if a.abs() < 90.0 => entries.push((f, a)),
            Ok(_) | Err(Error::OutOfScanRange { .. }) => offenders.push(f),
            Err(e) => return Err(e),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::FrequenciesOutOfScanRange { offenders });
    }
    let id = format!(
        "synthetic:q={:.4},n={},l={},f0={}",
        cfg.quality_factor, cfg.num_elements, cfg.element_spacing, cfg.resonant_freq
    );
    FrequencyAngleMap::new(id, entries)
}

/// Map of the tuned default antenna over `n` subcarriers of channel 114.
pub fn default_map(n: usize) -> FrequencyAngleMap {
    build_frequency_angle_map(&AntennaConfig::tuned_default(), &default_subcarriers(n))
        .expect("tuned default covers channel 114")
}

/// Parses a `frequency_hz,angle_deg` calibration table. Row numbers in
/// errors are 1-based file lines (the header is line 1).
pub fn parse_calibration<R: Read>(id: impl Into<String>, reader: R) -> Result<FrequencyAngleMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::CalibrationParse {
        row: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "frequency_hz" || &headers[1] != "angle_deg" {
        return Err(Error::CalibrationParse {
            row: 1,
            message: format!("expected header `frequency_hz,angle_deg`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut entries: Vec<(f64, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::CalibrationParse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::CalibrationParse {
                row,
                message: format!("expected 2 columns, got {}", record.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::CalibrationParse {
                    row,
                    message: format!("bad {what} `{s}`"),
                })
        };
        let f = parse(&record[0], "frequency")?;
        let a = parse(&record[1], "angle")?;
        if f <= 0.0 {
            return Err(Error::CalibrationParse {
                row,
                message: format!("frequency {f} must be positive"),
            });
        }
        if !(a > -90.0 && a < 90.0) {
            return Err(Error::CalibrationParse {
                row,
                message: format!("angle {a} outside (-90, 90)"),
            });
        }
        if let Some(&(pf, pa)) = entries.last() {
            if f <= pf {
                return Err(Error::CalibrationParse {
                    row,
                    message: "frequencies must be strictly increasing".into(),
                });
            }
            if entries.len() >= 2 {
                let rising = entries[1].1 > entries[0].1;
                if (rising && a <= pa) || (!rising && a >= pa) {
                    return Err(Error::CalibrationParse {
                        row,
                        message: "angles must be strictly monotonic".into(),
                    });
                }
            } else if a == pa {
                return Err(Error::CalibrationParse {
                    row,
                    message: "angles must be strictly monotonic".into(),
                });
            }
        }
        entries.push((f, a));
    }
    if entries.len() < 2 {
        return Err(Error::CalibrationParse {
            row: entries.len() + 2,
            message: format!("need at least 2 rows to interpolate, got {}", entries.len()),
        });
    }
    FrequencyAngleMap::new(id, entries)
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<FrequencyAngleMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_calibration(format!("calibration:{}", path.display()), file)
}

// ---------------------------------------------------------------------------
// Beam patterns

/// Normalized radiated amplitude D(f, θ).
pub trait BeamPattern: Send + Sync {
    fn gain(&self, freq_hz: f64, angle_deg: f64) -> f64;

    /// Whether the pattern is defined at this frequency.
    fn covers(&self, _freq_hz: f64) -> bool {
        true
    }

    fn describe(&self) -> String;
}

/// Analytic array factor of an [`AntennaConfig`].
#[derive(Debug, Clone)]
pub struct ArrayFactorPattern {
    pub config: AntennaConfig,
}

impl ArrayFactorPattern {
    pub fn new(config: AntennaConfig) -> Self {
        Self { config }
    }
}

impl BeamPattern for ArrayFactorPattern {
    fn gain(&self, freq_hz: f64, angle_deg: f64) -> f64 {
        array_factor(freq_hz, angle_deg, &self.config).unwrap_or(0.0)
    }

    fn covers(&self, freq_hz: f64) -> bool {
        beam_direction(freq_hz, &self.config).is_ok()
    }

    fn describe(&self) -> String {
        format!("array-factor(q={:.4})", self.config.quality_factor)
    }
}

/// Ideal uniform array whose beam at each frequency is pinned to the angle of
/// a [`FrequencyAngleMap`], e.g. a measured calibration.
#[derive(Debug, Clone)]
pub struct SteeredArrayPattern {
    pub map: FrequencyAngleMap,
    pub num_elements: usize,
    pub element_spacing: f64,
}

impl SteeredArrayPattern {
    pub fn new(map: FrequencyAngleMap, num_elements: usize, element_spacing: f64) -> Self {
        Self {
            map,
            num_elements,
            element_spacing,
        }
    }
}

impl BeamPattern for SteeredArrayPattern {
    fn gain(&self, freq_hz: f64, angle_deg: f64) -> f64 {
        let Ok(beam) = self.map.angle_for_frequency(freq_hz) else {
            return 0.0;
        };
        let psi = 2.0 * PI * self.element_spacing / wavelength(freq_hz)
            * (angle_deg.to_radians().sin() - beam.to_radians().sin());
        dirichlet_gain(psi, self.num_elements)
    }

    fn covers(&self, freq_hz: f64) -> bool {
        self.map.angle_for_frequency(freq_hz).is_ok()
    }

    fn describe(&self) -> String {
        format!("steered-array({})", self.map.id())
    }
}

/// D ≡ 1: a conventional omnidirectional transmit antenna.
#[derive(Debug, Clone, Copy, Default)]
pub struct Omnidirectional;

impl BeamPattern for Omnidirectional {
    fn gain(&self, _freq_hz: f64, _angle_deg: f64) -> f64 {
        1.0
    }

    fn describe(&self) -> String {
        "omnidirectional".into()
    }
}

/// Tabulated pattern; each frequency row is normalized to a maximum of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPatternGrid {
    pub frequencies: Vec<f64>,
    pub angles: Vec<f64>,
    /// Row-major: `gain[fi * angles.len() + ai]`.
    pub gain: Vec<f64>,
}

impl BeamPatternGrid {
    /// Angle axis from `lo` to `hi` (inclusive) at [`PATTERN_GRID_STEP_DEG`].
    pub fn default_angles(lo: f64, hi: f64) -> Vec<f64> {
        let n = ((hi - lo) / PATTERN_GRID_STEP_DEG).round() as usize;
        (0..=n).map(|i| lo + i as f64 * PATTERN_GRID_STEP_DEG).collect()
    }

    pub fn tabulate(pattern: &dyn BeamPattern, frequencies: &[f64], angles: &[f64]) -> Result<Self> {
        if frequencies.is_empty() || angles.len() < 2 {
            return Err(Error::InvalidInput("pattern grid needs frequencies and >= 2 angles".into()));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) || angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid axes must be strictly increasing".into()));
        }
        let rows = crate::par::map_slice(frequencies, |&f| {
            let mut row: Vec<f64> = angles.iter().map(|&a| pattern.gain(f, a)).collect();
            let peak = row.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                row.iter_mut().for_each(|g| *g /= peak);
            }
            row
        });
        Ok(Self {
            frequencies: frequencies.to_vec(),
            angles: angles.to_vec(),
            gain: rows.concat(),
        })
    }

    pub fn row(&self, fi: usize) -> &[f64] {
        let n = self.angles.len();
        &self.gain[fi * n..(fi + 1) * n]
    }

    /// Angle of the per-frequency maximum.
    pub fn peak_angle(&self, fi: usize) -> f64 {
        let row = self.row(fi);
        let (ai, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        self.angles[ai]
    }

    fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
        if axis.len() == 1 || x <= axis[0] {
            return (0, 0.0);
        }
        let last = axis.len() - 1;
        if x >= axis[last] {
            return (last - 1, 1.0);
        }
        let i = axis.partition_point(|&v| v <= x) - 1;
        (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
    }
}

impl BeamPattern for BeamPatternGrid {
    fn gain(&self, freq_hz: f64, angle_deg: f64) -> f64 {
        let n = self.angles.len();
        let (ai, at) = Self::bracket(&self.angles, angle_deg);
        let at_row = |fi: usize| {
            let r = &self.gain[fi * n..(fi + 1) * n];
            r[ai] * (1.0 - at) + r[ai + 1] * at
        };
        if self.frequencies.len() == 1 {
            return at_row(0);
        }
        let (fi, ft) = Self::bracket(&self.frequencies, freq_hz);
        at_row(fi) * (1.0 - ft) + at_row(fi + 1) * ft
    }

    fn covers(&self, freq_hz: f64) -> bool {
        let lo = self.frequencies[0];
        let hi = self.frequencies[self.frequencies.len() - 1];
        freq_hz >= lo && freq_hz <= hi
    }

    fn describe(&self) -> String {
        format!("grid({}x{})", self.frequencies.len(), self.angles.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn q200() -> AntennaConfig {
        AntennaConfig::new(12, 0.0145, 5.57e9, 200.0).unwrap()
    }

    /// Explicit phasor sum; independent of the Dirichlet closed form.
    fn explicit_af(f: f64, theta: f64, cfg: &AntennaConfig) -> f64 {
        let step = element_phase(f, cfg).unwrap()
            + 2.0 * PI * cfg.element_spacing * theta.to_radians().sin() / wavelength(f);
        let sum: Complex64 = (0..cfg.num_elements)
            .map(|n| Complex64::from_polar(1.0, n as f64 * step))
            .sum();
        sum.norm() / cfg.num_elements as f64
    }

    #[test]
    fn resonator_phase_zero_at_resonance() {
        assert_eq!(resonator_phase(5.57e9, &q200()).unwrap(), 0.0);
    }

    #[test]
    fn resonator_phase_without_resonance_is_zero() {
        let cfg = AntennaConfig::new(12, 0.0145, 5.57e9, 0.0).unwrap();
        for f in [1e9, 5.49e9, 5.65e9, 2e10] {
            assert_eq!(resonator_phase(f, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn resonator_phase_below_resonance() {
        // atan(200 * (5.57/5.49 - 5.49/5.57)) evaluated by hand: 1.39968...
        let v = resonator_phase(5.49e9, &q200()).unwrap();
        assert_relative_eq!(v, 1.399_682_723_718_716, epsilon = 1e-12);
        assert!((v - 1.400).abs() < 1e-3);
    }

    #[test]
    fn non_positive_frequency_rejected() {
        let cfg = q200();
        assert!(matches!(resonator_phase(0.0, &cfg), Err(Error::InvalidInput(_))));
        assert!(matches!(element_phase(-1.0, &cfg), Err(Error::InvalidInput(_))));
        assert!(beam_direction(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn element_phase_composition() {
        let cfg = q200().with_coupling_asymmetry(1e-9);
        assert_eq!(element_phase(5.57e9, &cfg).unwrap(), 0.0);
        let plain = q200();
        assert_eq!(
            element_phase(5.49e9, &plain).unwrap(),
            resonator_phase(5.49e9, &plain).unwrap()
        );
        let linear = AntennaConfig::new(12, 0.0145, 5.57e9, 0.0)
            .unwrap()
            .with_coupling_asymmetry(1e-9);
        assert_relative_eq!(element_phase(5.57e9 + 1e6, &linear).unwrap(), 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn beam_direction_identities() {
        let cfg = AntennaConfig::tuned_default();
        assert_eq!(beam_direction(cfg.resonant_freq, &cfg).unwrap(), 0.0);
        assert!(beam_direction(5.50e9, &cfg).unwrap() < 0.0);
        assert!(beam_direction(5.60e9, &cfg).unwrap() > 0.0);

        // Δφ = -2πl/λ  →  +90°
        let f = 5.6e9;
        let l = 0.0145;
        let step = -2.0 * PI * l / wavelength(f);
        let linear = AntennaConfig::new(12, l, 5.57e9, 0.0)
            .unwrap()
            .with_coupling_asymmetry(step / (f - 5.57e9));
        assert_relative_eq!(beam_direction(f, &linear).unwrap(), 90.0, epsilon = 1e-6);
    }

    #[test]
    fn beam_direction_chains_phase_and_steering() {
        // Q = 200 keeps 5.49 GHz inside the scan range (steering argument -0.839).
        let cfg = q200();
        let step = 1.399_682_723_718_716_f64;
        let expected = (-(SPEED_OF_LIGHT / 5.49e9) * step / (2.0 * PI * 0.0145)).asin().to_degrees();
        assert_relative_eq!(beam_direction(5.49e9, &cfg).unwrap(), expected, epsilon = 1e-9);
        assert_relative_eq!(expected, -57.028_189_861_436, epsilon = 1e-6);
    }

    #[test]
    fn beam_direction_out_of_range() {
        // the resonator phase saturates at pi/2, so a short element spacing is needed
        let cfg = AntennaConfig::new(12, 0.01, 5.57e9, 200.0).unwrap();
        assert!(matches!(
            beam_direction(5.3e9, &cfg),
            Err(Error::OutOfScanRange { .. })
        ));
    }

    #[test]
    fn array_factor_matches_phasor_sum() {
        let cfg = AntennaConfig::tuned_default();
        for &f in &[5.49e9, 5.53e9, 5.57e9, 5.61e9, 5.65e9] {
            for k in -18..=18 {
                let theta = k as f64 * 5.0;
                let fast = array_factor(f, theta, &cfg).unwrap();
                assert_relative_eq!(fast, explicit_af(f, theta, &cfg), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn array_factor_unity_on_beam() {
        let cfg = AntennaConfig::tuned_default();
        for f in default_subcarriers(64) {
            let beam = beam_direction(f, &cfg).unwrap();
            assert_relative_eq!(array_factor(f, beam, &cfg).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn array_factor_single_element_is_isotropic() {
        assert_eq!(dirichlet_gain(0.7, 1), 1.0);
        assert_eq!(dirichlet_gain(-2.1, 1), 1.0);
    }

    #[test]
    fn array_factor_first_null() {
        // Null where the phase step equals 2π/N.
        let cfg = AntennaConfig::tuned_default();
        let f = 5.57e9;
        let sin_null = 2.0 * PI / 12.0 * wavelength(f) / (2.0 * PI * cfg.element_spacing);
        let theta = sin_null.asin().to_degrees();
        assert!(array_factor(f, theta, &cfg).unwrap() < 1e-12);
        assert!(explicit_af(f, theta, &cfg) < 1e-12);
    }

    #[test]
    fn tuned_default_spans_sixty_degrees() {
        let cfg = AntennaConfig::tuned_default();
        let lo = beam_direction(BAND_START_HZ, &cfg).unwrap();
        let hi = beam_direction(BAND_END_HZ, &cfg).unwrap();
        assert_relative_eq!(hi - lo, 60.0, epsilon = 1e-6);
        assert!((cfg.quality_factor - 39.3134).abs() < 1e-3, "{}", cfg.quality_factor);
    }

    #[test]
    fn symmetric_frequencies_give_mirrored_angles() {
        // Odd symmetry holds for the swap f <-> f0²/f (resonator phase) but the
        // wavelength factor breaks exact mirroring for arithmetic offsets, so
        // use the geometric pair.
        let cfg = AntennaConfig::tuned_default();
        let f0 = cfg.resonant_freq;
        let f = 5.52e9;
        let phase_lo = resonator_phase(f, &cfg).unwrap();
        let phase_hi = resonator_phase(f0 * f0 / f, &cfg).unwrap();
        assert_relative_eq!(phase_lo, -phase_hi, epsilon = 1e-12);

        // Arithmetic mirror pairs: opposite signs, magnitudes equal up to the
        // wavelength ratio across the band.
        for df in [10e6, 40e6, 80e6] {
            let a = beam_direction(f0 - df, &cfg).unwrap();
            let b = beam_direction(f0 + df, &cfg).unwrap();
            assert!(a < 0.0 && b > 0.0);
            assert!((a + b).abs() < 1.3, "{a} vs {b}");
        }
    }

    #[test]
    fn map_build_and_errors() {
        let cfg = AntennaConfig::tuned_default();
        let single = build_frequency_angle_map(&cfg, &[cfg.resonant_freq]).unwrap();
        assert_eq!(single.entries().collect::<Vec<_>>(), vec![(cfg.resonant_freq, 0.0)]);

        let map = default_map(64);
        assert_eq!(map.len(), 64);
        assert!(map.angles().windows(2).all(|w| w[1] > w[0]));

        let hot = AntennaConfig::new(12, 0.01, 5.57e9, 200.0).unwrap();
        match build_frequency_angle_map(&hot, &default_subcarriers(16)) {
            Err(Error::FrequenciesOutOfScanRange { offenders }) => {
                assert!(!offenders.is_empty());
                assert!(offenders.iter().all(|&f| beam_direction(f, &hot).is_err()));
            }
            other => panic!("expected scan-range error, got {other:?}"),
        }
    }

    #[test]
    fn map_interpolation_and_inverse() {
        let map = FrequencyAngleMap::new("m", [(5.49e9, -21.0), (5.65e9, 39.0)]).unwrap();
        assert_relative_eq!(map.angle_for_frequency(5.57e9).unwrap(), 9.0, epsilon = 1e-9);
        assert_eq!(map.angle_for_frequency(5.49e9).unwrap(), -21.0);
        assert!(matches!(map.frequency_for_angle(45.0), Err(Error::OutOfFov { .. })));
        assert!(matches!(map.angle_for_frequency(5.7e9), Err(Error::OutOfFov { .. })));
        for a in [-21.0, -3.3, 0.0, 17.0, 39.0] {
            let f = map.frequency_for_angle(a).unwrap();
            assert_relative_eq!(map.angle_for_frequency(f).unwrap(), a, epsilon = 1e-9);
        }
    }

    #[test]
    fn decreasing_map_inverts() {
        let map = FrequencyAngleMap::new("d", [(1.0, 10.0), (2.0, 0.0), (3.0, -10.0)]).unwrap();
        assert_relative_eq!(map.frequency_for_angle(5.0).unwrap(), 1.5);
        assert_relative_eq!(map.frequency_for_angle(-10.0).unwrap(), 3.0);
    }

    #[test]
    fn calibration_parsing() {
        let ok = "frequency_hz,angle_deg\n5.49e9,-21\n5.65e9,39\n";
        let map = parse_calibration("c", ok.as_bytes()).unwrap();
        assert_relative_eq!(map.angle_for_frequency(5.57e9).unwrap(), 9.0, epsilon = 1e-9);

        let single = "frequency_hz,angle_deg\n5.49e9,-21\n";
        assert!(matches!(parse_calibration("c", single.as_bytes()), Err(Error::CalibrationParse { .. })));

        let non_monotone = "frequency_hz,angle_deg\n5.49e9,-21\n5.55e9,0\n5.60e9,-5\n";
        match parse_calibration("c", non_monotone.as_bytes()) {
            Err(Error::CalibrationParse { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
        let malformed = "frequency_hz,angle_deg\n5.49e9,-21\nabc,3\n";
        match parse_calibration("c", malformed.as_bytes()) {
            Err(Error::CalibrationParse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let no_header = "5.49e9,-21\n5.65e9,39\n";
        assert!(parse_calibration("c", no_header.as_bytes()).is_err());
    }

    #[test]
    fn calibration_round_trip_through_csv() {
        let map = default_map(8);
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let back = parse_calibration(map.id(), buf.as_slice()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn grid_rows_peak_at_beam() {
        let cfg = AntennaConfig::tuned_default();
        let freqs = default_subcarriers(16);
        let grid = BeamPatternGrid::tabulate(
            &ArrayFactorPattern::new(cfg.clone()),
            &freqs,
            &BeamPatternGrid::default_angles(-90.0, 90.0),
        )
        .unwrap();
        for (fi, &f) in freqs.iter().enumerate() {
            let beam = beam_direction(f, &cfg).unwrap();
            assert!((grid.peak_angle(fi) - beam).abs() <= PATTERN_GRID_STEP_DEG / 2.0 + 1e-9);
            let max = grid.row(fi).iter().cloned().fold(0.0, f64::max);
            assert_relative_eq!(max, 1.0);
            assert!(grid.row(fi).iter().all(|&g| (0.0..=1.0).contains(&g)));
        }
        // between angle nodes the lookup is linear, so agreement is approximate
        let f = freqs[5];
        assert_relative_eq!(
            grid.gain(f, 12.3),
            ArrayFactorPattern::new(cfg.clone()).gain(f, 12.3) / grid.row(5).iter().cloned().fold(0.0, f64::max),
            epsilon = 1e-5
        );
    }

    #[test]
    fn steered_pattern_follows_map() {
        let map = FrequencyAngleMap::new("m", [(5.49e9, -21.0), (5.65e9, 39.0)]).unwrap();
        let p = SteeredArrayPattern::new(map, 12, 0.0145);
        assert_relative_eq!(p.gain(5.57e9, 9.0), 1.0, epsilon = 1e-12);
        assert!(p.gain(5.57e9, -30.0) < 0.3);
        assert!(!p.covers(5.7e9));
    }
}
