use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use evbs::distributions::{logevbs_cdf, logevbs_pdf, LogEvbsParams};
use evbs::linalg::sym_eigen;
use evbs::regression::{hessian, loglik, score};
use evbs::{Mode, SymMatrix};
use evbs_bench::{gust_like, reference_theta};

fn bench_density(c: &mut Criterion) {
    let mut group = c.benchmark_group("log-evbs");
    let grid: Vec<f64> = (0..1000).map(|k| -3.0 + 6.0 * k as f64 / 1000.0).collect();
    // the Gumbel branch and both sides of the series switch
    for gamma in [0.0, 1e-5, -0.15, 0.2] {
        let p = LogEvbsParams::new(0.5, 0.0, gamma).unwrap();
        group.bench_with_input(BenchmarkId::new("pdf", gamma), &p, |b, p| {
            b.iter(|| grid.iter().map(|&y| logevbs_pdf(y, p)).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("cdf", gamma), &p, |b, p| {
            b.iter(|| grid.iter().map(|&y| logevbs_cdf(y, p)).sum::<f64>())
        });
    }
    group.finish();
}

fn bench_likelihood(c: &mut Criterion) {
    let mut group = c.benchmark_group("likelihood");
    let theta = reference_theta();
    for n in [124, 1000, 10_000] {
        let data = gust_like(n, 1);
        group.bench_with_input(BenchmarkId::new("loglik", n), &data, |b, d| b.iter(|| loglik(black_box(&theta), d)));
        group.bench_with_input(BenchmarkId::new("score", n), &data, |b, d| {
            b.iter(|| score(black_box(&theta), d, Mode::Free))
        });
        group.bench_with_input(BenchmarkId::new("hessian", n), &data, |b, d| {
            b.iter(|| hessian(black_box(&theta), d, Mode::Free))
        });
    }
    group.finish();
}

fn bench_eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi-eigen");
    group.sample_size(20);
    for n in [32, 124, 250] {
        let m = SymMatrix::from_upper(n, |i, j| 1.0 / (1.0 + (i + j) as f64) + if i == j { 1.0 } else { 0.0 }).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| sym_eigen(m)));
    }
    group.finish();
}

criterion_group!(benches, bench_density, bench_likelihood, bench_eigen);
criterion_main!(benches);
