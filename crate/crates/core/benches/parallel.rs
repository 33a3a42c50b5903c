//! Sequential vs parallel execution of the data-parallel loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use thermident_core::identification::*;
use thermident_core::twin::{self, Noise};
use thermident_core::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn noise() -> Noise {
    Noise { measurement_std: 0.05, process_air_std: 0.01, process_wall_std: 0.003 }
}

fn objective(c: &mut Criterion) {
    let desc = twin::building();
    let p = twin::reference_parameters();
    let weekends: Vec<_> = (0..4).map(|w| twin::excitation_weekend(&p, w, w as u64, noise()).unwrap()).collect();
    let settings = ModelSettings::default();
    let mut group = c.benchmark_group("objective_4_weekends");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_objective(&desc, &weekends, &p, &settings, exec).unwrap().sse)
        });
    }
    group.finish();
}

fn fixed_profile(c: &mut Criterion) {
    let p = twin::reference_parameters();
    let dm = ModelSettings::default().discrete_model(&twin::building(), &p).unwrap();
    let all = twin::regular_weeks(&p, Some(&twin::ig_model()), 0, 8, 1, noise()).unwrap();
    let weeks: Vec<_> = (0..8).map(|w| all.slice(w * 672..(w + 1) * 672)).collect();
    let mut group = c.benchmark_group("fixed_profile_8_weeks");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_fixed_ig(&dm, &weeks, &IgSettings::default(), exec).unwrap().slots())
        });
    }
    group.finish();
}

fn prediction_starts(c: &mut Criterion) {
    let p = twin::reference_parameters();
    let dm = ModelSettings::default().discrete_model(&twin::building(), &p).unwrap();
    let week = twin::regular_weeks(&p, Some(&twin::ig_model()), 0, 1, 2, noise()).unwrap();
    let settings = PredictionSettings { horizon: 96, pooling: Pooling::Sliding, ..Default::default() };
    let mut group = c.benchmark_group("online_predictions_sliding_96");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| predict_online_ig(&dm, &week, &settings, exec).unwrap().starts.len())
        });
    }
    group.finish();
}

criterion_group!(benches, objective, fixed_profile, prediction_starts);
criterion_main!(benches);
