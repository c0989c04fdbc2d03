//! Two-receiver CSI synthesis.
//!
//! Each subcarrier sees the static paths and every target through the
//! transmit beam pattern D(f, θ), plus circular Gaussian noise and an optional
//! per-packet phase offset shared by both receivers.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dispersion::{wavelength, BeamPattern, Omnidirectional};
use crate::error::{Error, Result};
use crate::scene::{OffsetModel, Scenario};

const NOISE_STREAM: u64 = 0;
const OFFSET_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub scenario_id: String,
    pub seed: u64,
    pub map_id: String,
    pub sample_rate: f64,
    pub subcarrier_freqs: Vec<f64>,
    pub num_rx: usize,
}

/// CSI samples on a (time, subcarrier, rx) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    timestamps: Vec<f64>,
    subcarrier_freqs: Vec<f64>,
    num_rx: usize,
    /// Flat, index `(t * subcarriers + sc) * num_rx + rx`.
    samples: Vec<Complex64>,
    pub metadata: TraceMetadata,
}

impl CsiTrace {
    pub fn new(
        sample_rate: f64,
        subcarrier_freqs: Vec<f64>,
        num_rx: usize,
        samples: Vec<Complex64>,
        scenario_id: impl Into<String>,
        seed: u64,
        map_id: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidInput(format!("sample rate must be > 0, got {sample_rate}")));
        }
        if num_rx == 0 {
            return Err(Error::InvalidInput("trace needs at least one receiver".into()));
        }
        if subcarrier_freqs.is_empty() || subcarrier_freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "subcarrier frequencies must be non-empty and strictly increasing".into(),
            ));
        }
        let per_t = subcarrier_freqs.len() * num_rx;
        if !samples.len().is_multiple_of(per_t) {
            return Err(Error::InvalidInput(format!(
                "{} samples do not fill a grid of {} subcarriers x {num_rx} rx",
                samples.len(),
                subcarrier_freqs.len()
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("trace contains non-finite samples".into()));
        }
        let n = samples.len() / per_t;
        let timestamps = (0..n).map(|k| k as f64 / sample_rate).collect();
        Ok(Self {
            timestamps,
            metadata: TraceMetadata {
                scenario_id: scenario_id.into(),
                seed,
                map_id: map_id.into(),
                sample_rate,
                subcarrier_freqs: subcarrier_freqs.clone(),
                num_rx,
            },
            subcarrier_freqs,
            num_rx,
            samples,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn subcarrier_freqs(&self) -> &[f64] {
        &self.subcarrier_freqs
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_samples(&self) -> usize {
        self.timestamps.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.subcarrier_freqs.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.metadata.sample_rate
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn get(&self, t: usize, sc: usize, rx: usize) -> Complex64 {
        self.samples[(t * self.subcarrier_freqs.len() + sc) * self.num_rx + rx]
    }

    /// Time series of one (subcarrier, rx) stream.
    pub fn stream(&self, sc: usize, rx: usize) -> Vec<Complex64> {
        (0..self.num_samples()).map(|t| self.get(t, sc, rx)).collect()
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|z| *z *= c);
        out
    }

    /// Trace restricted to one receiver.
    pub fn single_rx(&self, rx: usize) -> Result<Self> {
        if rx >= self.num_rx {
            return Err(Error::InvalidInput(format!("rx {rx} out of range")));
        }
        let samples = self.samples.iter().skip(rx).step_by(self.num_rx).copied().collect();
        let mut out = Self::new(
            self.sample_rate(),
            self.subcarrier_freqs.clone(),
            1,
            samples,
            self.metadata.scenario_id.clone(),
            self.metadata.seed,
            self.metadata.map_id.clone(),
        )?;
        out.metadata.num_rx = 1;
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "subcarrier_index", "freq_hz", "rx", "real", "imag"])?;
        for (ti, &t) in self.timestamps.iter().enumerate() {
            for (sc, &f) in self.subcarrier_freqs.iter().enumerate() {
                for rx in 0..self.num_rx {
                    let z = self.get(ti, sc, rx);
                    w.write_record(&[
                        t.to_string(),
                        sc.to_string(),
                        f.to_string(),
                        rx.to_string(),
                        z.re.to_string(),
                        z.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Path of the JSON sidecar that accompanies a trace CSV.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta.json")
    }

    /// Writes the CSV and its metadata sidecar.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        self.write_csv(BufWriter::new(File::create(csv_path)?))?;
        let meta = BufWriter::new(File::create(Self::sidecar_path(csv_path))?);
        serde_json::to_writer_pretty(meta, &self.metadata)?;
        Ok(())
    }

    /// Reads a trace CSV given its metadata. Rows must be in the order written
    /// by [`CsiTrace::write_csv`].
    pub fn read_csv<R: Read>(reader: R, metadata: TraceMetadata) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            subcarrier_index: usize,
            rx: usize,
            real: f64,
            imag: f64,
        }
        let nsc = metadata.subcarrier_freqs.len();
        let nrx = metadata.num_rx;
        let mut samples = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row?;
            let expected_sc = (i / nrx.max(1)) % nsc.max(1);
            if row.subcarrier_index != expected_sc || row.rx != i % nrx.max(1) {
                return Err(Error::InvalidInput(format!(
                    "trace row {}: expected subcarrier {expected_sc} rx {}",
                    i + 2,
                    i % nrx.max(1)
                )));
            }
            samples.push(Complex64::new(row.real, row.imag));
        }
        let mut trace = Self::new(
            metadata.sample_rate,
            metadata.subcarrier_freqs.clone(),
            nrx,
            samples,
            metadata.scenario_id.clone(),
            metadata.seed,
            metadata.map_id.clone(),
        )?;
        trace.metadata = metadata;
        Ok(trace)
    }

    pub fn load(csv_path: impl AsRef<Path>) -> Result<Self> {
        let csv_path = csv_path.as_ref();
        let meta: TraceMetadata =
            serde_json::from_reader(BufReader::new(File::open(Self::sidecar_path(csv_path))?))?;
        Self::read_csv(BufReader::new(File::open(csv_path)?), meta)
    }
}

/// Synthesizes the two-receiver CSI of `scenario` through `pattern`.
///
/// The deterministic channel is evaluated in parallel; noise and offsets are
/// drawn sequentially from seeded ChaCha streams so the result is identical
/// with or without the `parallel` feature.
pub fn synthesize(
    scenario: &Scenario,
    pattern: &dyn BeamPattern,
    subcarrier_freqs: &[f64],
) -> Result<CsiTrace> {
    scenario.validate(None)?;
    if subcarrier_freqs.is_empty() || subcarrier_freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "subcarrier frequencies must be non-empty and strictly increasing".into(),
        ));
    }
    let offenders: Vec<f64> = subcarrier_freqs
        .iter()
        .copied()
        .filter(|&f| !pattern.covers(f))
        .collect();
    if !offenders.is_empty() {
        return Err(Error::FrequenciesOutOfScanRange { offenders });
    }

    let sigma = scenario.resolved_noise_sigma()?;
    let nsc = subcarrier_freqs.len();
    let n = scenario.num_samples();
    let wavenumbers: Vec<f64> = subcarrier_freqs.iter().map(|&f| 2.0 * PI / wavelength(f)).collect();

    let mut statics = vec![Complex64::new(0.0, 0.0); nsc * 2];
    for r in &scenario.reflectors {
        let paths = scenario.reflector_path_lengths(r);
        for (sc, &f) in subcarrier_freqs.iter().enumerate() {
            let g = r.amplitude * pattern.gain(f, r.angle);
            for rx in 0..2 {
                statics[sc * 2 + rx] += Complex64::from_polar(g, -wavenumbers[sc] * paths[rx]);
            }
        }
    }

    let tx = scenario.geometry.tx_position;
    let per_t = nsc * 2;
    let mut samples = vec![Complex64::new(0.0, 0.0); n * per_t];
    crate::par::for_each_chunk_mut(&mut samples, per_t, |ti, row| {
        row.copy_from_slice(&statics);
        let t = ti as f64 / scenario.sample_rate;
        for target in &scenario.targets {
            let p = target.trajectory.position_at(t, tx);
            let angle = scenario.geometry.relative_angle(p);
            let leg = crate::scene::distance(tx, p);
            let d = [
                leg + crate::scene::distance(p, scenario.geometry.rx_positions[0]),
                leg + crate::scene::distance(p, scenario.geometry.rx_positions[1]),
            ];
            let amp = target.reflectivity * d[0].powf(-scenario.amplitude_exponent);
            for (sc, &f) in subcarrier_freqs.iter().enumerate() {
                let g = amp * pattern.gain(f, angle);
                for rx in 0..2 {
                    row[sc * 2 + rx] += Complex64::from_polar(g, -wavenumbers[sc] * d[rx]);
                }
            }
        }
    });

    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma / 2f64.sqrt())
            .map_err(|e| Error::InvalidInput(format!("noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        rng.set_stream(NOISE_STREAM);
        for z in samples.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *z += Complex64::new(re, im);
        }
    }

    if scenario.offset_model == OffsetModel::PerPacketRandom {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        rng.set_stream(OFFSET_STREAM);
        for row in samples.chunks_mut(per_t) {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            let rot = Complex64::from_polar(1.0, phase);
            row.iter_mut().for_each(|z| *z *= rot);
        }
    }

    CsiTrace::new(
        scenario.sample_rate,
        subcarrier_freqs.to_vec(),
        2,
        samples,
        scenario.id.clone(),
        scenario.rng_seed,
        pattern.describe(),
    )
}

/// The same scenario seen through an omnidirectional transmit antenna.
pub fn omnidirectional_baseline(scenario: &Scenario, subcarrier_freqs: &[f64]) -> Result<CsiTrace> {
    synthesize(scenario, &Omnidirectional, subcarrier_freqs)
}
