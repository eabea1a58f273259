use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use naggs_bench::{logistic, normal_sample};
use naggs_core::dist_metrics::{kl_divergence_knn, ks_statistic, wasserstein1, SampleSet};
use naggs_core::quadratic_analysis::{spectral_radius_curve, stationary_covariance, SpectrumConfig};
use naggs_core::spectrum::{extreme_eigenvalues, HessianOperator};

fn quadratic_analysis(c: &mut Criterion) {
    let cfg = SpectrumConfig::new(1.0, 1.9, 1.0, 5.29, 1.0).unwrap();
    c.bench_function("lyapunov_4x4", |b| b.iter(|| stationary_covariance(black_box(&cfg)).unwrap()));
    let alphas: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.01).collect();
    c.bench_function("radius_curve_1000", |b| b.iter(|| spectral_radius_curve(1.0, 3.0, 1.0, black_box(&alphas)).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let a = SampleSet::new(normal_sample(10_000, 1)).unwrap();
    let b = SampleSet::new(normal_sample(10_000, 2).into_iter().map(|x| 1.5 * x).collect()).unwrap();
    let mut group = c.benchmark_group("metrics_1e4");
    group.bench_function("ks", |bn| bn.iter(|| ks_statistic(black_box(&a), &b)));
    group.bench_function("w1", |bn| bn.iter(|| wasserstein1(black_box(&a), &b)));
    group.bench_function("kl_knn", |bn| bn.iter(|| kl_divergence_knn(black_box(&a), &b, 1).unwrap()));
    group.finish();
}

fn hessian_spectrum(c: &mut Criterion) {
    let p = logistic(200, 20);
    let op = HessianOperator::new(&p, vec![0.1; p.param_dim()]).unwrap();
    c.bench_function("extreme_eigenvalues_logistic_21", |b| {
        b.iter(|| extreme_eigenvalues(black_box(&op), 1e-8, 100_000, 3).unwrap())
    });
}

criterion_group!(benches, quadratic_analysis, metrics, hessian_spectrum);
criterion_main!(benches);
