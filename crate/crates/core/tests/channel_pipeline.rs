use fsa_sense::channel::{omnidirectional_baseline, synthesize, CsiTrace};
use fsa_sense::dispersion::{default_map, ArrayFactorPattern, AntennaConfig, FrequencyAngleMap};
use fsa_sense::pipeline::*;
use fsa_sense::scene::*;
use fsa_sense::{Complex64, Error};
use proptest::prelude::*;

fn pattern() -> ArrayFactorPattern {
    ArrayFactorPattern::new(AntennaConfig::tuned_default())
}

fn los() -> Reflector {
    Reflector { angle: -90.0, excess_path: 0.0, amplitude: 1.0 }
}

fn mover(angle: f64, duration: f64, speed: f64) -> Scenario {
    let mut s = Scenario::new("mover", duration);
    let g = s.geometry.clone();
    let dir = g.direction(angle);
    s.targets.push(Target {
        trajectory: Trajectory::Linear { start: g.point_at(angle, 2.0), velocity: [speed * dir[0], speed * dir[1]] },
        reflectivity: 0.01,
    });
    s.reflectors.push(los());
    s
}

fn nearest_index(map: &FrequencyAngleMap, angle: f64) -> usize {
    (0..map.len())
        .min_by(|&a, &b| (map.angles()[a] - angle).abs().total_cmp(&(map.angles()[b] - angle).abs()))
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>(), angle in -25.0f64..25.0) {
        let mut s = mover(angle, 0.5, 0.1);
        s.rng_seed = seed;
        s.snr_db = Some(20.0);
        s.offset_model = OffsetModel::PerPacketRandom;
        let freqs = default_map(16).frequencies().to_vec();
        let a = synthesize(&s, &pattern(), &freqs).unwrap();
        let b = synthesize(&s, &pattern(), &freqs).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn offsets_are_transparent_to_the_ratio(seed in any::<u64>()) {
        let mut s = mover(5.0, 0.5, 0.1);
        s.rng_seed = seed;
        s.snr_db = Some(20.0);
        let freqs = default_map(16).frequencies().to_vec();
        let plain = csi_ratio(&synthesize(&s, &pattern(), &freqs).unwrap()).unwrap();
        s.offset_model = OffsetModel::PerPacketRandom;
        let rotated = csi_ratio(&synthesize(&s, &pattern(), &freqs).unwrap()).unwrap();
        for (a, b) in plain.values.iter().zip(&rotated.values) {
            prop_assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn profile_is_scale_invariant(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let mut s = mover(-10.0, 2.0, 0.1);
        s.snr_db = Some(20.0);
        let trace = synthesize(&s, &pattern(), default_map(16).frequencies()).unwrap();
        let cfg = PipelineConfig::default();
        let a = ssnr_profile(&csi_ratio(&trace).unwrap(), &cfg, 0.5).unwrap();
        let scaled = trace.scaled(Complex64::new(re, im));
        let b = ssnr_profile(&csi_ratio(&scaled).unwrap(), &cfg, 0.5).unwrap();
        prop_assert_eq!(a.best_subcarrier(), b.best_subcarrier());
        for (x, y) in a.mean_circular_variance.iter().zip(&b.mean_circular_variance) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn superposition_of_statics_and_targets() {
    let freqs = default_map(8).frequencies().to_vec();
    let mut both = mover(12.0, 1.0, 0.1);
    both.reflectors.push(Reflector { angle: 30.0, excess_path: 2.5, amplitude: 0.02 });
    let mut statics = both.clone();
    statics.targets.clear();
    let mut dynamic = both.clone();
    dynamic.reflectors.clear();
    let a = synthesize(&both, &pattern(), &freqs).unwrap();
    let b = synthesize(&statics, &pattern(), &freqs).unwrap();
    let c = synthesize(&dynamic, &pattern(), &freqs).unwrap();
    for ((x, y), z) in a.samples().iter().zip(b.samples()).zip(c.samples()) {
        assert!((x - y - z).norm() < 1e-12);
    }
}

#[test]
fn omnidirectional_variance_ratio_is_flat() {
    let map = default_map(64);
    let mut s = Scenario::new("pair", 4.0);
    let g = s.geometry.clone();
    for (angle, speed) in [(-20.0, 0.1), (20.0, -0.13)] {
        let dir = g.direction(angle);
        s.targets.push(Target {
            trajectory: Trajectory::Linear { start: g.point_at(angle, 2.0), velocity: [speed * dir[0], speed * dir[1]] },
            reflectivity: 0.01,
        });
    }
    let variance = |trace: &CsiTrace, sc: usize| {
        let x = trace.stream(sc, 0);
        let m = x.iter().sum::<Complex64>() / x.len() as f64;
        x.iter().map(|z| (z - m).norm_sqr()).sum::<f64>() / x.len() as f64
    };
    let (i, j) = (nearest_index(&map, -20.0), nearest_index(&map, 20.0));
    let omni = omnidirectional_baseline(&s, map.frequencies()).unwrap();
    let ratio = variance(&omni, i) / variance(&omni, j);
    assert!((ratio - 1.0).abs() < 0.05, "omni ratio {ratio}");
    // through the FSA each subcarrier is dominated by the target its beam points at
    let alone = |k: usize| {
        let mut one = s.clone();
        one.targets = vec![s.targets[k].clone()];
        synthesize(&one, &pattern(), map.frequencies()).unwrap()
    };
    let (left, right) = (alone(0), alone(1));
    assert!(variance(&left, i) > 10.0 * variance(&right, i));
    assert!(variance(&right, j) > 10.0 * variance(&left, j));
}

#[test]
fn td_static_power_is_twice_noise_power() {
    let sigma = 0.05;
    let mut s = Scenario::new("static", 10.0);
    s.reflectors.push(los());
    s.reflectors.push(Reflector { angle: 10.0, excess_path: 1.0, amplitude: 0.3 });
    s.noise_sigma = Some(sigma);
    s.rng_seed = 9;
    let trace = synthesize(&s, &pattern(), default_map(8).frequencies()).unwrap();
    let mut power = 0.0;
    let mut n = 0usize;
    for sc in 0..8 {
        for rx in 0..2 {
            let td = td_csi(&trace.stream(sc, rx), 1).unwrap();
            power += td.iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += td.len();
        }
    }
    assert!(n >= 10_000);
    let ratio = power / n as f64 / (2.0 * sigma * sigma);
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn pure_noise_windows_look_unstable() {
    let mut s = Scenario::new("noise", 5.0);
    s.reflectors.push(los());
    s.noise_sigma = Some(1e-3);
    s.rng_seed = 21;
    let trace = synthesize(&s, &pattern(), default_map(64).frequencies()).unwrap();
    let profiles = ssnr_profiles(&csi_ratio(&trace).unwrap(), &PipelineConfig::default()).unwrap();
    for p in &profiles {
        assert!(p.mean_circular_variance.iter().all(|&v| v > 0.5));
    }
}

#[test]
fn argmax_lands_near_target_subcarrier() {
    let map = default_map(64);
    for angle in [-22.0, -4.0, 17.0] {
        let mut s = mover(angle, 1.0, 0.1);
        s.snr_db = Some(20.0);
        s.rng_seed = 4;
        let trace = synthesize(&s, &pattern(), map.frequencies()).unwrap();
        let p = ssnr_profile(&csi_ratio(&trace).unwrap(), &PipelineConfig::default(), 0.0).unwrap();
        let best = p.best_subcarrier().unwrap();
        let truth = s.target_angle_at(0, 0.5).unwrap();
        let target = nearest_index(&map, truth);
        assert!(best.abs_diff(target) <= 2, "angle {angle}: best {best}, nearest {target}");
        let score_best = (0..p.len()).max_by(|&a, &b| p.ssnr_score[a].total_cmp(&p.ssnr_score[b])).unwrap();
        assert_eq!(score_best, best);
    }
}

#[test]
fn multi_interval_beats_single_shortest_lag() {
    let map = default_map(64);
    let mut wins = 0;
    for seed in 0..5u64 {
        let mut s = Scenario::new("slow", 10.0);
        let g = s.geometry.clone();
        s.targets.push(Target {
            trajectory: Trajectory::Oscillation { center: g.point_at(8.0, 2.0), axis: g.direction(8.0), amplitude: 0.005, period: 2.0 },
            reflectivity: 0.01,
        });
        s.reflectors.push(los());
        s.snr_db = Some(20.0);
        s.rng_seed = seed;
        let ratio = csi_ratio(&synthesize(&s, &pattern(), map.frequencies()).unwrap()).unwrap();
        let sc = nearest_index(&map, 8.0);
        let full = aggregate_profiles(&ssnr_profiles(&ratio, &PipelineConfig::default()).unwrap(), 1e-12).unwrap();
        let short_cfg = PipelineConfig::with_intervals(vec![0.005]);
        let short = aggregate_profiles(&ssnr_profiles(&ratio, &short_cfg).unwrap(), 1e-12).unwrap();
        if full.mean_circular_variance[sc] <= short.mean_circular_variance[sc] {
            wins += 1;
        }
    }
    assert_eq!(wins, 5);
}

#[test]
fn invalid_samples_are_flagged_and_never_selected() {
    let map = default_map(16);
    let s = mover(0.0, 1.5, 0.1);
    let trace = synthesize(&s, &pattern(), map.frequencies()).unwrap();
    // silence rx1 on one subcarrier
    let mut samples = trace.samples().to_vec();
    let best_clean = ssnr_profile(&csi_ratio(&trace).unwrap(), &PipelineConfig::default(), 0.0)
        .unwrap()
        .best_subcarrier()
        .unwrap();
    for t in 0..trace.num_samples() {
        samples[(t * 16 + best_clean) * 2 + 1] = Complex64::new(0.0, 0.0);
    }
    let broken = CsiTrace::new(200.0, map.frequencies().to_vec(), 2, samples, "broken", 0, "m").unwrap();
    let ratio = csi_ratio(&broken).unwrap();
    assert_eq!(ratio.invalid_count(), trace.num_samples());
    let p = ssnr_profile(&ratio, &PipelineConfig::default(), 0.0).unwrap();
    assert!(!p.valid[best_clean]);
    assert_ne!(p.best_subcarrier(), Some(best_clean));
}

#[test]
fn ratio_edge_cases() {
    let freqs = default_map(4).frequencies().to_vec();
    let same: Vec<Complex64> = (0..40).map(|k| Complex64::new(1.0 + k as f64, -0.5)).flat_map(|z| [z, z]).collect();
    let trace = CsiTrace::new(200.0, freqs.clone(), 2, same, "same", 0, "m").unwrap();
    let r = csi_ratio(&trace).unwrap();
    assert!(r.values.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

    let single = CsiTrace::new(200.0, freqs, 1, vec![Complex64::new(1.0, 0.0); 40], "one", 0, "m").unwrap();
    assert!(matches!(csi_ratio(&single), Err(Error::Unsupported(_))));
}
