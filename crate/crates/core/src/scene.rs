//! Plan-view (2-D) sensing scenarios.
//!
//! Angle convention: degrees relative to the FSA boresight, counterclockwise
//! positive when viewed from above. World bearings are measured from +x.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::FrequencyAngleMap;
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Receiver spacing of about half a wavelength at 5.57 GHz.
pub const DEFAULT_RX_SEPARATION_M: f64 = 0.027;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 200.0;
pub const DEFAULT_BREATHING_AMPLITUDE_M: f64 = 0.005;
pub const DEFAULT_AMPLITUDE_EXPONENT: f64 = 2.0;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn distance(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn unit(a: Point) -> Option<Point> {
    let n = a[0].hypot(a[1]);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Unit vector at a world bearing (degrees from +x, counterclockwise).
pub fn bearing_vector(world_deg: f64) -> Point {
    let r = world_deg.to_radians();
    [r.cos(), r.sin()]
}

/// Wraps degrees into (-180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub tx_position: Point,
    /// World bearing of the FSA boresight in degrees.
    pub fsa_boresight: f64,
    pub rx_positions: [Point; 2],
}

impl Default for Geometry {
    /// Tx at the origin facing +y; receiver pair 1 m to the right, its axis
    /// perpendicular to the tx-rx baseline.
    fn default() -> Self {
        Self::with_separation(1.0)
    }
}

impl Geometry {
    pub fn with_separation(tx_rx_distance: f64) -> Self {
        Self {
            tx_position: [0.0, 0.0],
            fsa_boresight: 90.0,
            rx_positions: [
                [tx_rx_distance, 0.0],
                [tx_rx_distance, DEFAULT_RX_SEPARATION_M],
            ],
        }
    }

    pub fn rx_separation(&self) -> f64 {
        distance(self.rx_positions[0], self.rx_positions[1])
    }

    pub fn rx_midpoint(&self) -> Point {
        scale(add(self.rx_positions[0], self.rx_positions[1]), 0.5)
    }

    /// Distance from the transmitter to the receiver pair's midpoint.
    pub fn transceiver_separation(&self) -> f64 {
        distance(self.tx_position, self.rx_midpoint())
    }

    /// Angle of a world point relative to boresight, in (-180, 180].
    pub fn relative_angle(&self, p: Point) -> f64 {
        let d = sub(p, self.tx_position);
        wrap_degrees(d[1].atan2(d[0]).to_degrees() - self.fsa_boresight)
    }

    /// Unit vector pointing from the tx toward relative angle `deg`.
    pub fn direction(&self, deg: f64) -> Point {
        bearing_vector(self.fsa_boresight + deg)
    }

    /// World point at `range` meters along relative angle `deg`.
    pub fn point_at(&self, deg: f64, range: f64) -> Point {
        add(self.tx_position, scale(self.direction(deg), range))
    }

    pub fn translate(&mut self, delta: Point) {
        self.tx_position = add(self.tx_position, delta);
        for rx in &mut self.rx_positions {
            *rx = add(*rx, delta);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Linear {
        start: Point,
        /// m/s
        velocity: Point,
    },
    /// Sinusoidal motion `center + axis * amplitude * sin(2πt/period)`.
    Oscillation {
        center: Point,
        axis: Point,
        amplitude: f64,
        period: f64,
    },
    /// Chest displacement along the tx-target ray.
    Breathing {
        position: Point,
        #[serde(default = "default_breathing_amplitude")]
        displacement_amplitude: f64,
        /// Breaths per minute.
        rate: f64,
    },
    Stationary {
        position: Point,
    },
    /// Walk through the points at constant speed, then stand at the last one.
    Waypoints {
        points: Vec<Point>,
        speed: f64,
    },
}

fn default_breathing_amplitude() -> f64 {
    DEFAULT_BREATHING_AMPLITUDE_M
}

impl Trajectory {
    /// Position at time `t`; `tx` orients the breathing displacement.
    pub fn position_at(&self, t: f64, tx: Point) -> Point {
        match self {
            Trajectory::Linear { start, velocity } => add(*start, scale(*velocity, t)),
            Trajectory::Oscillation {
                center,
                axis,
                amplitude,
                period,
            } => {
                let u = unit(*axis).unwrap_or([0.0, 0.0]);
                add(*center, scale(u, amplitude * (2.0 * PI * t / period).sin()))
            }
            Trajectory::Breathing {
                position,
                displacement_amplitude,
                rate,
            } => {
                let u = unit(sub(*position, tx)).unwrap_or([0.0, 0.0]);
                let s = displacement_amplitude * (2.0 * PI * rate / 60.0 * t).sin();
                add(*position, scale(u, s))
            }
            Trajectory::Stationary { position } => *position,
            Trajectory::Waypoints { points, speed } => {
                let mut remaining = (speed * t).max(0.0);
                for w in points.windows(2) {
                    let leg = distance(w[0], w[1]);
                    if remaining <= leg {
                        return match unit(sub(w[1], w[0])) {
                            Some(u) => add(w[0], scale(u, remaining)),
                            None => w[0],
                        };
                    }
                    remaining -= leg;
                }
                points.last().copied().unwrap_or([0.0, 0.0])
            }
        }
    }

    /// Point used as the trajectory's nominal location: the motion midpoint
    /// for linear paths, the rest position otherwise, the destination for waypoints.
    pub fn reference_point(&self, duration: f64, tx: Point) -> Point {
        match self {
            Trajectory::Linear { .. } => self.position_at(0.5 * duration, tx),
            Trajectory::Oscillation { center, .. } => *center,
            Trajectory::Breathing { position, .. } => *position,
            Trajectory::Stationary { position } => *position,
            Trajectory::Waypoints { points, .. } => points.last().copied().unwrap_or([0.0, 0.0]),
        }
    }

    pub fn translate(&mut self, delta: Point) {
        match self {
            Trajectory::Linear { start, .. } => *start = add(*start, delta),
            Trajectory::Oscillation { center, .. } => *center = add(*center, delta),
            Trajectory::Breathing { position, .. } => *position = add(*position, delta),
            Trajectory::Stationary { position } => *position = add(*position, delta),
            Trajectory::Waypoints { points, .. } => {
                for p in points {
                    *p = add(*p, delta);
                }
            }
        }
    }

    /// Breathing rate in bpm, if this is a breathing trajectory.
    pub fn breathing_rate(&self) -> Option<f64> {
        match self {
            Trajectory::Breathing { rate, .. } => Some(*rate),
            _ => None,
        }
    }

    fn problems(&self, path: &str, out: &mut Vec<String>) {
        let finite = |p: &Point| p[0].is_finite() && p[1].is_finite();
        match self {
            Trajectory::Linear { start, velocity } => {
                if !finite(start) || !finite(velocity) {
                    out.push(format!("{path}: linear trajectory must be finite"));
                }
            }
            Trajectory::Oscillation {
                center,
                axis,
                amplitude,
                period,
            } => {
                if !finite(center) {
                    out.push(format!("{path}.center: must be finite"));
                }
                if unit(*axis).is_none() {
                    out.push(format!("{path}.axis: must be a nonzero vector"));
                }
                if !(*amplitude > 0.0) {
                    out.push(format!("{path}.amplitude: must be > 0, got {amplitude}"));
                }
                if !(*period > 0.0) {
                    out.push(format!("{path}.period: must be > 0, got {period}"));
                }
            }
            Trajectory::Breathing {
                position,
                displacement_amplitude,
                rate,
            } => {
                if !finite(position) {
                    out.push(format!("{path}.position: must be finite"));
                }
                if !(*displacement_amplitude > 0.0) {
                    out.push(format!(
                        "{path}.displacement_amplitude: must be > 0, got {displacement_amplitude}"
                    ));
                }
                if !(*rate > 0.0 && *rate <= 60.0) {
                    out.push(format!("{path}.rate: must be in (0, 60], got {rate}"));
                }
            }
            Trajectory::Stationary { position } => {
                if !finite(position) {
                    out.push(format!("{path}.position: must be finite"));
                }
            }
            Trajectory::Waypoints { points, speed } => {
                if points.is_empty() {
                    out.push(format!("{path}.points: need at least one point"));
                }
                if !points.iter().all(finite) {
                    out.push(format!("{path}.points: must be finite"));
                }
                if !(*speed > 0.0) {
                    out.push(format!("{path}.speed: must be > 0, got {speed}"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub trajectory: Trajectory,
    /// Reflection amplitude at 1 m of bistatic path.
    pub reflectivity: f64,
}

/// Static scatterer described by what enters the static channel: its bearing
/// from the FSA, its extra path length over line-of-sight and its amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    /// Degrees relative to boresight.
    pub angle: f64,
    /// Meters of path beyond the tx-rx line of sight. Zero is the direct path.
    pub excess_path: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetModel {
    #[default]
    None,
    /// Common phase offset drawn uniformly on [0, 2π) for every packet.
    PerPacketRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_scenario_id")]
    pub id: String,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub targets: Vec<Target>,
    /// Seconds.
    pub duration: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    /// Per-sample complex noise standard deviation. Mutually exclusive with `snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    /// Noise level relative to target 0's peak dynamic amplitude at t = 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub offset_model: OffsetModel,
    #[serde(default)]
    pub rng_seed: u64,
    /// Dynamic amplitude falls as `reflectivity * path^-exponent`.
    #[serde(default = "default_amplitude_exponent")]
    pub amplitude_exponent: f64,
}

fn default_scenario_id() -> String {
    "scenario".into()
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

fn default_amplitude_exponent() -> f64 {
    DEFAULT_AMPLITUDE_EXPONENT
}

impl Scenario {
    pub fn new(id: impl Into<String>, duration: f64) -> Self {
        Self {
            id: id.into(),
            geometry: Geometry::default(),
            reflectors: Vec::new(),
            targets: Vec::new(),
            duration,
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            noise_sigma: None,
            snr_db: None,
            offset_model: OffsetModel::None,
            rng_seed: 0,
            amplitude_exponent: DEFAULT_AMPLITUDE_EXPONENT,
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration * self.sample_rate + 1e-9).floor() as usize
    }

    fn target(&self, index: usize) -> Result<&Target> {
        self.targets.get(index).ok_or_else(|| {
            Error::InvalidInput(format!(
                "target index {index} out of range ({} targets)",
                self.targets.len()
            ))
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.duration {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "time {t} outside [0, {}]",
                self.duration
            )))
        }
    }

    pub fn target_position(&self, index: usize, t: f64) -> Result<Point> {
        let target = self.target(index)?;
        self.check_time(t)?;
        Ok(target.trajectory.position_at(t, self.geometry.tx_position))
    }

    /// Target angle relative to the FSA boresight, degrees in (-180, 180].
    pub fn target_angle_at(&self, index: usize, t: f64) -> Result<f64> {
        let p = self.target_position(index, t)?;
        Ok(self.geometry.relative_angle(p))
    }

    /// Bistatic tx → target → rx path length in meters.
    pub fn dynamic_path_length(&self, index: usize, rx: usize, t: f64) -> Result<f64> {
        if rx > 1 {
            return Err(Error::InvalidInput(format!("rx index {rx} out of range (2 receivers)")));
        }
        let p = self.target_position(index, t)?;
        Ok(distance(self.geometry.tx_position, p) + distance(p, self.geometry.rx_positions[rx]))
    }

    /// Dynamic-path amplitude A(t) = reflectivity · path^-exponent, using rx 0.
    pub fn target_amplitude(&self, index: usize, t: f64) -> Result<f64> {
        let d = self.dynamic_path_length(index, 0, t)?;
        Ok(self.targets[index].reflectivity * d.powf(-self.amplitude_exponent))
    }

    /// Noise standard deviation after resolving `snr_db`.
    pub fn resolved_noise_sigma(&self) -> Result<f64> {
        match (self.noise_sigma, self.snr_db) {
            (Some(_), Some(_)) => Err(Error::config(
                "noise_sigma",
                "`noise_sigma` and `snr_db` are mutually exclusive",
            )),
            (Some(s), None) => Ok(s),
            (None, Some(snr)) => {
                if self.targets.is_empty() {
                    return Err(Error::config("snr_db", "snr_db requires at least one target"));
                }
                let a = self.target_amplitude(0, 0.0)?;
                Ok(a * 10f64.powf(-snr / 20.0))
            }
            (None, None) => Ok(0.0),
        }
    }

    /// Per-rx path lengths of a static reflector. The scatterer sits on the
    /// reflector's bearing where tx → point → rx-midpoint is `excess_path`
    /// longer than line of sight.
    pub fn reflector_path_lengths(&self, reflector: &Reflector) -> [f64; 2] {
        let g = &self.geometry;
        let point = if reflector.excess_path <= 0.0 {
            g.tx_position
        } else {
            let u = g.direction(reflector.angle);
            let w = sub(g.tx_position, g.rx_midpoint());
            let total = w[0].hypot(w[1]) + reflector.excess_path;
            let range = (total * total - dot(w, w)) / (2.0 * (total + dot(w, u)));
            add(g.tx_position, scale(u, range))
        };
        let leg = distance(g.tx_position, point);
        [
            leg + distance(point, g.rx_positions[0]),
            leg + distance(point, g.rx_positions[1]),
        ]
    }

    pub fn translate(&mut self, delta: Point) {
        self.geometry.translate(delta);
        for t in &mut self.targets {
            t.trajectory.translate(delta);
        }
    }

    /// Checks every invariant. Returns warnings (e.g. targets leaving the map's
    /// field of view) on success, or the full list of violations.
    pub fn validate(&self, map: Option<&FrequencyAngleMap>) -> Result<Vec<String>> {
        let mut errors = Vec::new();
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            errors.push(format!("duration: must be > 0, got {}", self.duration));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            errors.push(format!("sample_rate: must be > 0, got {}", self.sample_rate));
        }
        match (self.noise_sigma, self.snr_db) {
            (Some(_), Some(_)) => {
                errors.push("noise_sigma: mutually exclusive with snr_db".into());
            }
            (Some(s), _) if !(s >= 0.0 && s.is_finite()) => {
                errors.push(format!("noise_sigma: must be >= 0, got {s}"));
            }
            (_, Some(snr)) if !snr.is_finite() => errors.push("snr_db: must be finite".into()),
            (None, Some(_)) if self.targets.is_empty() => {
                errors.push("snr_db: requires at least one target".into());
            }
            _ => {}
        }
        if !self.amplitude_exponent.is_finite() || self.amplitude_exponent < 0.0 {
            errors.push(format!(
                "amplitude_exponent: must be >= 0, got {}",
                self.amplitude_exponent
            ));
        }
        let g = &self.geometry;
        if g.rx_separation() <= 0.0 {
            errors.push("geometry.rx_positions: the two receivers must be distinct".into());
        }
        if ![g.tx_position, g.rx_positions[0], g.rx_positions[1]]
            .iter()
            .all(|p| p[0].is_finite() && p[1].is_finite())
            || !g.fsa_boresight.is_finite()
        {
            errors.push("geometry: positions and boresight must be finite".into());
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if !(r.amplitude >= 0.0 && r.amplitude.is_finite()) {
                errors.push(format!("reflectors[{i}].amplitude: must be >= 0, got {}", r.amplitude));
            }
            if !(r.excess_path >= 0.0 && r.excess_path.is_finite()) {
                errors.push(format!(
                    "reflectors[{i}].excess_path: must be >= 0, got {}",
                    r.excess_path
                ));
            }
            if !r.angle.is_finite() {
                errors.push(format!("reflectors[{i}].angle: must be finite"));
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.reflectivity > 0.0 && t.reflectivity.is_finite()) {
                errors.push(format!("targets[{i}].reflectivity: must be > 0, got {}", t.reflectivity));
            }
            t.trajectory.problems(&format!("targets[{i}].trajectory"), &mut errors);
        }
        if !errors.is_empty() {
            return Err(Error::InvalidScenario(errors));
        }

        let mut warnings = Vec::new();
        let n = self.num_samples().max(1);
        for (i, target) in self.targets.iter().enumerate() {
            for k in 0..n {
                let t = k as f64 / self.sample_rate;
                let p = target.trajectory.position_at(t, g.tx_position);
                let d_tx = distance(p, g.tx_position);
                let d_rx = distance(p, g.rx_positions[0]).min(distance(p, g.rx_positions[1]));
                if d_tx < 1e-6 || d_rx < 1e-6 {
                    warnings.push(format!("targets[{i}]: coincides with a transceiver at t = {t:.3} s"));
                    break;
                }
                if let Some(map) = map {
                    let (lo, hi) = map.angle_span();
                    let a = g.relative_angle(p);
                    if a < lo || a > hi {
                        warnings.push(format!(
                            "targets[{i}]: angle {a:.1} deg at t = {t:.3} s is outside the field of view [{lo:.1}, {hi:.1}]"
                        ));
                        break;
                    }
                }
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::default_map;
    use approx::assert_relative_eq;

    fn stationary(p: Point) -> Target {
        Target {
            trajectory: Trajectory::Stationary { position: p },
            reflectivity: 0.01,
        }
    }

    #[test]
    fn angle_convention() {
        let mut s = Scenario::new("a", 10.0);
        s.targets.push(stationary([0.0, 3.0]));
        s.targets.push(stationary([-2.0, 0.0]));
        s.targets.push(stationary([2.0, 2.0]));
        assert_relative_eq!(s.target_angle_at(0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(s.target_angle_at(1, 0.0).unwrap(), 90.0);
        assert_relative_eq!(s.target_angle_at(2, 0.0).unwrap(), -45.0, epsilon = 1e-12);
    }

    #[test]
    fn crossing_boresight_changes_sign() {
        let mut s = Scenario::new("x", 10.0);
        s.targets.push(Target {
            trajectory: Trajectory::Linear {
                start: [1.0, 2.0],
                velocity: [-0.2, 0.0],
            },
            reflectivity: 0.01,
        });
        assert!(s.target_angle_at(0, 0.0).unwrap() < 0.0);
        assert_relative_eq!(s.target_angle_at(0, 5.0).unwrap(), 0.0, epsilon = 1e-12);
        assert!(s.target_angle_at(0, 10.0).unwrap() > 0.0);
    }

    #[test]
    fn query_errors() {
        let mut s = Scenario::new("e", 2.0);
        s.targets.push(stationary([0.0, 1.0]));
        assert!(s.target_angle_at(1, 0.0).is_err());
        assert!(s.target_angle_at(0, 2.5).is_err());
        assert!(s.dynamic_path_length(0, 2, 0.0).is_err());
    }

    #[test]
    fn path_length_pythagoras() {
        let mut s = Scenario::new("p", 1.0);
        s.geometry = Geometry {
            tx_position: [0.0, 0.0],
            fsa_boresight: 90.0,
            rx_positions: [[1.0, 0.0], [1.0, 0.027]],
        };
        s.targets.push(stationary([0.5, 2.0]));
        let expected = 2.0 * (0.5f64 * 0.5 + 2.0 * 2.0).sqrt();
        assert_relative_eq!(s.dynamic_path_length(0, 0, 0.0).unwrap(), expected, epsilon = 1e-12);
        assert_eq!(
            s.dynamic_path_length(0, 0, 0.0).unwrap(),
            s.dynamic_path_length(0, 0, 0.9).unwrap()
        );
    }

    #[test]
    fn breathing_is_periodic() {
        let mut s = Scenario::new("b", 30.0);
        s.targets.push(Target {
            trajectory: Trajectory::Breathing {
                position: [0.3, 2.0],
                displacement_amplitude: 0.005,
                rate: 15.0,
            },
            reflectivity: 0.01,
        });
        let period = 60.0 / 15.0;
        for k in 0..20 {
            let t = 0.37 * k as f64;
            if t + period > 30.0 {
                break;
            }
            assert_relative_eq!(
                s.dynamic_path_length(0, 0, t).unwrap(),
                s.dynamic_path_length(0, 0, t + period).unwrap(),
                epsilon = 1e-12
            );
        }
        // path excursion bounded by two legs of chest displacement
        let samples: Vec<f64> = (0..400)
            .map(|k| s.dynamic_path_length(0, 0, k as f64 * period / 400.0).unwrap())
            .collect();
        let span = samples.iter().cloned().fold(f64::MIN, f64::max) - samples.iter().cloned().fold(f64::MAX, f64::min);
        assert!(span <= 2.0 * 0.005 * 2.0 + 1e-12);
        assert!(span > 0.005);
    }

    #[test]
    fn waypoints_walk_then_stop() {
        let tr = Trajectory::Waypoints {
            points: vec![[0.0, 1.0], [0.0, 3.0], [1.0, 3.0]],
            speed: 1.0,
        };
        assert_eq!(tr.position_at(1.0, [0.0, 0.0]), [0.0, 2.0]);
        assert_eq!(tr.position_at(2.5, [0.0, 0.0]), [0.5, 3.0]);
        assert_eq!(tr.position_at(10.0, [0.0, 0.0]), [1.0, 3.0]);
    }

    #[test]
    fn validate_reports_all_problems() {
        let mut s = Scenario::new("v", 0.0);
        s.noise_sigma = Some(-1.0);
        s.geometry.rx_positions = [[1.0, 0.0], [1.0, 0.0]];
        s.targets.push(Target {
            trajectory: Trajectory::Oscillation {
                center: [0.0, 1.0],
                axis: [0.0, 0.0],
                amplitude: 0.0,
                period: 1.0,
            },
            reflectivity: 0.0,
        });
        match s.validate(None) {
            Err(Error::InvalidScenario(list)) => {
                assert!(list.iter().any(|m| m.starts_with("duration")));
                assert!(list.iter().any(|m| m.starts_with("noise_sigma")));
                assert!(list.iter().any(|m| m.contains("rx_positions")));
                assert!(list.iter().any(|m| m.contains("reflectivity")));
                assert!(list.iter().any(|m| m.contains("axis")));
                assert!(list.iter().any(|m| m.contains("amplitude")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validate_warns_outside_fov() {
        let map = default_map(64);
        let mut s = Scenario::new("w", 1.0);
        s.targets.push(stationary(s.geometry.point_at(80.0, 2.0)));
        let warnings = s.validate(Some(&map)).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("field of view"));

        let mut ok = Scenario::new("ok", 1.0);
        ok.targets.push(stationary(ok.geometry.point_at(10.0, 2.0)));
        assert!(ok.validate(Some(&map)).unwrap().is_empty());
    }

    #[test]
    fn snr_resolves_against_target_amplitude() {
        let mut s = Scenario::new("s", 1.0);
        s.targets.push(stationary([0.0, 2.0]));
        s.snr_db = Some(20.0);
        let a = s.target_amplitude(0, 0.0).unwrap();
        assert_relative_eq!(s.resolved_noise_sigma().unwrap(), a / 10.0, epsilon = 1e-15);
        s.noise_sigma = Some(0.1);
        assert!(s.resolved_noise_sigma().is_err());
        assert!(s.validate(None).is_err());
    }

    #[test]
    fn line_of_sight_reflector() {
        let s = Scenario::new("los", 1.0);
        let los = Reflector {
            angle: -90.0,
            excess_path: 0.0,
            amplitude: 1.0,
        };
        let [d0, d1] = s.reflector_path_lengths(&los);
        assert_relative_eq!(d0, 1.0);
        assert_relative_eq!(d1, (1.0f64 + 0.027 * 0.027).sqrt());
        let wall = Reflector {
            angle: 20.0,
            excess_path: 3.0,
            amplitude: 0.1,
        };
        let [w0, w1] = s.reflector_path_lengths(&wall);
        let mid = 0.5 * (w0 + w1);
        assert!((mid - (s.geometry.transceiver_separation() + 3.0)).abs() < 1e-3);
    }

    #[test]
    fn toml_round_trip_rejects_unknown_fields() {
        let mut s = Scenario::new("rt", 5.0);
        s.targets.push(Target {
            trajectory: Trajectory::Breathing {
                position: [0.0, 2.0],
                displacement_amplitude: 0.005,
                rate: 14.0,
            },
            reflectivity: 0.01,
        });
        s.offset_model = OffsetModel::PerPacketRandom;
        let text = toml::to_string(&s).unwrap();
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
        let unknown = format!("{text}\nbogus = 1\n");
        assert!(toml::from_str::<Scenario>(&unknown).is_err());
    }
}
