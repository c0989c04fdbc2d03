//! Built-in experiments.
//!
//! All presets share one room: a line-of-sight path that dominates the
//! static channel, a few weak wall reflections and targets a few meters away
//! at 20 dB SNR with per-packet phase offsets enabled.

use super::config::{Case, ExperimentConfig, SweepParameter, SweepSpec, Task, Truth};
use crate::error::{Error, Result};
use crate::estimators::{ClassificationRule, RegionSpec, RespirationConfig, Sector};
use crate::pipeline::PipelineConfig;
use crate::scene::{Geometry, OffsetModel, Point, Reflector, Scenario, Target, Trajectory};

pub const PRESET_NAMES: &[&str] = &[
    "benchmark_angles",
    "benchmark_distance",
    "benchmark_separation",
    "living_room_multitarget",
    "fan_interference",
    "bedroom",
    "corner_trajectories",
    "room_entry",
];

pub const BENCHMARK_ANGLES: [f64; 5] = [-30.0, -15.0, 0.0, 15.0, 30.0];
const SNR_DB: f64 = 20.0;
const TARGET_REFLECTIVITY: f64 = 0.01;

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "benchmark_angles" => benchmark_angles(),
        "benchmark_distance" => benchmark_distance(),
        "benchmark_separation" => benchmark_separation(),
        "living_room_multitarget" => living_room_multitarget(),
        "fan_interference" => fan_interference(),
        "bedroom" => bedroom(),
        "corner_trajectories" => corner_trajectories(),
        "room_entry" => room_entry(),
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (available: {})", PRESET_NAMES.join(", ")),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn room_reflectors() -> Vec<Reflector> {
    vec![
        // direct tx -> rx path, leaving the FSA through its side lobes
        Reflector { angle: -90.0, excess_path: 0.0, amplitude: 1.0 },
        Reflector { angle: -40.0, excess_path: 3.0, amplitude: 0.02 },
        Reflector { angle: 25.0, excess_path: 4.5, amplitude: 0.015 },
        Reflector { angle: 60.0, excess_path: 2.0, amplitude: 0.01 },
    ]
}

fn room(id: &str, duration: f64) -> Scenario {
    let mut s = Scenario::new(id, duration);
    s.geometry = Geometry::default();
    s.reflectors = room_reflectors();
    s.snr_db = Some(SNR_DB);
    s.offset_model = OffsetModel::PerPacketRandom;
    s
}

fn target(trajectory: Trajectory) -> Target {
    Target { trajectory, reflectivity: TARGET_REFLECTIVITY }
}

/// Walk of `length` m at `speed` m/s along the ray at `angle`, centered on `range`.
fn radial_walk(g: &Geometry, angle: f64, range: f64, length: f64, speed: f64) -> Trajectory {
    let dir = g.direction(angle);
    Trajectory::Linear {
        start: g.point_at(angle, range - length / 2.0),
        velocity: [speed * dir[0], speed * dir[1]],
    }
}

/// 1 cm peak-to-peak radial oscillation averaging 1 cm/s.
fn small_motion(g: &Geometry, angle: f64, range: f64) -> Trajectory {
    Trajectory::Oscillation {
        center: g.point_at(angle, range),
        axis: g.direction(angle),
        amplitude: 0.005,
        period: 2.0,
    }
}

fn breathing(g: &Geometry, angle: f64, range: f64, rate: f64) -> Trajectory {
    Trajectory::Breathing {
        position: g.point_at(angle, range),
        displacement_amplitude: 0.005,
        rate,
    }
}

fn direction_case(label: String, group: &str, scenario: Scenario, angle: f64) -> Case {
    Case {
        label,
        group: Some(group.into()),
        scenario,
        truth: Truth { angle_deg: Some(angle), ..Truth::default() },
        start_jitter_m: 0.0,
    }
}

fn experiment(id: &str, task: Task, cases: Vec<Case>) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        task,
        trials: 10,
        base_seed: 0,
        antenna: None,
        calibration: None,
        num_subcarriers: 64,
        pipeline: PipelineConfig::default(),
        no_motion_threshold: super::config::DEFAULT_NO_MOTION_THRESHOLD,
        respiration: RespirationConfig::default(),
        regions: None,
        region_rule: ClassificationRule::Majority,
        sweep: None,
        cases,
    }
}

/// Five bearings, each with a 1 m walk at 10 cm/s and a 1 cm oscillation.
pub fn benchmark_angles() -> ExperimentConfig {
    let mut cases = Vec::new();
    for &angle in &BENCHMARK_ANGLES {
        let mut large = room(&format!("large_{angle:+.0}"), 10.0);
        large.targets.push(target(radial_walk(&large.geometry, angle, 2.0, 1.0, 0.1)));
        cases.push(direction_case(format!("large_{angle:+.0}"), "large", large, angle));

        let mut small = room(&format!("small_{angle:+.0}"), 10.0);
        small.targets.push(target(small_motion(&small.geometry, angle, 2.0)));
        cases.push(direction_case(format!("small_{angle:+.0}"), "small", small, angle));
    }
    experiment("benchmark_angles", Task::Direction, cases)
}

fn walker_cases(range: f64) -> Vec<Case> {
    [-20.0, 0.0, 20.0]
        .iter()
        .map(|&angle| {
            let mut s = room(&format!("walk_{angle:+.0}"), 10.0);
            s.targets.push(target(radial_walk(&s.geometry, angle, range, 1.0, 0.1)));
            direction_case(format!("walk_{angle:+.0}"), "large", s, angle)
        })
        .collect()
}

/// Walkers at three bearings; sweeps their distance from the FSA.
pub fn benchmark_distance() -> ExperimentConfig {
    let mut cfg = experiment("benchmark_distance", Task::Direction, walker_cases(3.0));
    cfg.sweep = Some(SweepSpec {
        parameter: SweepParameter::TargetDistance,
        values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
    });
    cfg
}

/// Walkers at three bearings; sweeps the tx-rx separation.
pub fn benchmark_separation() -> ExperimentConfig {
    let mut cfg = experiment("benchmark_separation", Task::Direction, walker_cases(2.5));
    cfg.sweep = Some(SweepSpec {
        parameter: SweepParameter::TransceiverSeparation,
        values: vec![1.0, 2.0, 3.0],
    });
    cfg
}

fn respiration_case(label: &str, scenario: Scenario, directions: Vec<f64>, rates: Vec<f64>) -> Case {
    Case {
        label: label.into(),
        group: None,
        scenario,
        truth: Truth { directions, rates_bpm: rates, ..Truth::default() },
        start_jitter_m: 0.0,
    }
}

/// Three people breathing at different rates in different directions.
pub fn living_room_multitarget() -> ExperimentConfig {
    let mut s = room("living_room", 60.0);
    let people = [(-20.0, 2.0, 12.0), (0.0, 2.5, 15.0), (20.0, 2.2, 18.0)];
    for &(angle, range, rate) in &people {
        s.targets.push(target(breathing(&s.geometry, angle, range, rate)));
    }
    let case = respiration_case(
        "three_sleepers",
        s,
        people.iter().map(|p| p.0).collect(),
        people.iter().map(|p| p.2).collect(),
    );
    experiment("living_room_multitarget", Task::Respiration, vec![case])
}

/// One person breathing while an oscillating fan, a stronger reflector with
/// an in-band rhythm, runs elsewhere in the room.
pub fn fan_interference() -> ExperimentConfig {
    let mut s = room("fan_interference", 60.0);
    s.targets.push(target(breathing(&s.geometry, -15.0, 2.0, 15.0)));
    s.targets.push(Target {
        trajectory: Trajectory::Oscillation {
            center: s.geometry.point_at(20.0, 1.5),
            axis: s.geometry.direction(20.0),
            amplitude: 0.01,
            period: 3.0,
        },
        reflectivity: 2.0 * TARGET_REFLECTIVITY,
    });
    let case = respiration_case("sleeper_and_fan", s, vec![-15.0], vec![15.0]);
    experiment("fan_interference", Task::Respiration, vec![case])
}

/// A single sleeper with no interference.
pub fn bedroom() -> ExperimentConfig {
    let mut s = room("bedroom", 60.0);
    s.targets.push(target(breathing(&s.geometry, 5.0, 2.5, 14.0)));
    let case = respiration_case("sleeper", s, vec![5.0], vec![14.0]);
    experiment("bedroom", Task::Respiration, vec![case])
}

fn sectors(entries: &[(&str, f64, f64)]) -> RegionSpec {
    RegionSpec {
        sectors: entries
            .iter()
            .map(|&(label, lo, hi)| Sector { label: label.into(), lo, hi })
            .collect(),
    }
}

fn region_case(label: &str, scenario: Scenario, region: &str, jitter: f64) -> Case {
    Case {
        label: label.into(),
        group: None,
        scenario,
        truth: Truth { region: Some(region.into()), ..Truth::default() },
        start_jitter_m: jitter,
    }
}

fn waypoints(g: &Geometry, points: &[(f64, f64)], speed: f64) -> Trajectory {
    Trajectory::Waypoints {
        points: points.iter().map(|&(a, r)| g.point_at(a, r)).collect::<Vec<Point>>(),
        speed,
    }
}

/// Four walks, each confined to one corner sector of the room.
pub fn corner_trajectories() -> ExperimentConfig {
    let regions = sectors(&[("R1", -30.0, -15.0), ("R2", -15.0, 0.0), ("R3", 0.0, 15.0), ("R4", 15.0, 29.0)]);
    let walks = [("R1", -22.5), ("R2", -7.5), ("R3", 7.5), ("R4", 22.0)];
    let cases = walks
        .iter()
        .map(|&(label, center)| {
            let mut s = room(&format!("corner_{label}"), 8.0);
            let path = [(center - 3.0, 1.5), (center + 3.0, 2.3), (center, 3.0)];
            s.targets.push(target(waypoints(&s.geometry, &path, 0.3)));
            region_case(&format!("corner_{label}"), s, label, 0.0)
        })
        .collect();
    let mut cfg = experiment("corner_trajectories", Task::Region, cases);
    cfg.regions = Some(regions);
    cfg.region_rule = ClassificationRule::Majority;
    cfg
}

/// A person enters through a doorway in front of the FSA, walks into one of
/// three rooms and stops. The room is the sector of the last motion seen.
pub fn room_entry() -> ExperimentConfig {
    let regions = sectors(&[("room_a", -30.0, -10.0), ("room_b", -10.0, 10.0), ("room_c", 10.0, 29.0)]);
    let rooms = [("room_a", -20.0), ("room_b", 0.0), ("room_c", 20.0)];
    let cases = rooms
        .iter()
        .map(|&(label, angle)| {
            let mut s = room(&format!("enter_{label}"), 8.0);
            s.targets.push(target(waypoints(&s.geometry, &[(0.0, 1.2), (angle, 3.0)], 0.5)));
            region_case(&format!("enter_{label}"), s, label, 0.3)
        })
        .collect();
    let mut cfg = experiment("room_entry", Task::Region, cases);
    cfg.regions = Some(regions);
    cfg.region_rule = ClassificationRule::LastValid;
    cfg
}
