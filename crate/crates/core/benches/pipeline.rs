//! Throughput of the hot paths on the rayon pool versus one thread.
//!
//! Build with `--no-default-features` to benchmark the sequential fallback
//! itself; the single-thread pool here only approximates it.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fsa_sense::channel::{synthesize, CsiTrace};
use fsa_sense::dispersion::{default_map, AntennaConfig, ArrayFactorPattern, FrequencyAngleMap};
use fsa_sense::estimators::track_direction;
use fsa_sense::harness::preset;
use fsa_sense::pipeline::{csi_ratio, ssnr_profiles, PipelineConfig, RatioTrace};
use fsa_sense::scene::Scenario;

struct Fixture {
    scenario: Scenario,
    pattern: ArrayFactorPattern,
    map: FrequencyAngleMap,
    trace: CsiTrace,
    ratio: RatioTrace,
}

fn fixture() -> Fixture {
    let scenario = preset("benchmark_angles").unwrap().cases[2].scenario.clone();
    let pattern = ArrayFactorPattern::new(AntennaConfig::tuned_default());
    let map = default_map(64);
    let trace = synthesize(&scenario, &pattern, map.frequencies()).unwrap();
    let ratio = csi_ratio(&trace).unwrap();
    Fixture { scenario, pattern, map, trace, ratio }
}

type Runner = Box<dyn Fn(&mut (dyn FnMut() + Send))>;

fn runners() -> Vec<(&'static str, Runner)> {
    let mut out: Vec<(&'static str, Runner)> = Vec::new();
    if fsa_sense::par::is_parallel() {
        out.push(("rayon", Box::new(|f: &mut (dyn FnMut() + Send)| f())));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        out.push(("single_thread", Box::new(move |f: &mut (dyn FnMut() + Send)| single.install(&mut *f))));
    } else {
        out.push(("sequential", Box::new(|f: &mut (dyn FnMut() + Send)| f())));
    }
    out
}

fn bench(c: &mut Criterion) {
    let fx = fixture();
    let cfg = PipelineConfig::default();
    let runners = runners();

    let mut group = c.benchmark_group("synthesize");
    group.sample_size(20);
    for (name, run) in &runners {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                std::hint::black_box(synthesize(&fx.scenario, &fx.pattern, fx.map.frequencies()).unwrap());
            }))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("ssnr_profiles");
    group.sample_size(20);
    for (name, run) in &runners {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                std::hint::black_box(ssnr_profiles(&fx.ratio, &cfg).unwrap());
            }))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("track_direction");
    group.sample_size(20);
    for (name, run) in &runners {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                std::hint::black_box(track_direction(&fx.trace, &fx.map, &cfg, 0.7).unwrap());
            }))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
