//! Sequential vs rayon execution of the data-parallel loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fnar::bootstrap::{run_bootstrap, BootstrapConfig};
use fnar::forecastlab::{run_comparison, LabConfig, LassoConfig, ModelKind, WindowPlan};
use fnar::model::fit_ols;
use fnar::montecarlo::{generate, rate_experiment_factors, SyntheticSpec};
use fnar::netfactors::{estimate_factor_model, gram_mode3_with};
use fnar::Exec;
use std::hint::black_box;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn gram(c: &mut Criterion) {
    let d = generate(&SyntheticSpec::new(30, 40, 3, 200)).unwrap();
    let mut group = c.benchmark_group("gram_mode3");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gram_mode3_with(black_box(d.panel.tensors()), exec).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut spec = SyntheticSpec::new(6, 8, 2, 60);
    spec.noise_sd = 0.05;
    let d = generate(&spec).unwrap();
    let (model, _) = estimate_factor_model(&d.panel, 2).unwrap();
    let fit = fit_ols(&d.y, model.factors()).unwrap();
    let mut group = c.benchmark_group("bootstrap_50");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let config = BootstrapConfig {
            iterations: 50,
            seed: 1,
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_bootstrap(&d.panel, &d.y, &model, &fit, &config).unwrap())
        });
    }
    group.finish();
}

fn montecarlo(c: &mut Criterion) {
    let base = SyntheticSpec::new(5, 10, 2, 50);
    let mut group = c.benchmark_group("factor_rates");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rate_experiment_factors(&base, &[10, 20], &[50, 100], 5, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn forecast(c: &mut Criterion) {
    let d = generate(&SyntheticSpec::new(6, 6, 1, 120)).unwrap();
    let plan = WindowPlan::trailing(120, 20).unwrap();
    let mut group = c.benchmark_group("forecast_windows");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let config = LabConfig {
            pc_components: 2,
            lasso: LassoConfig {
                folds: 5,
                grid_size: 20,
                ..Default::default()
            },
            exec,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_comparison(&d.y, d.truth.factors(), &plan, &ModelKind::ALL, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gram, bootstrap, montecarlo, forecast);
criterion_main!(benches);
