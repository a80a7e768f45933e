use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tautweight::ictv::{IctvOptions, IctvSource};
use tautweight::par::Exec;
use tautweight::sweep::{alpha_sweep, ictv_sweep, refinement_sweep};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn refinement(c: &mut Criterion) {
    let mut g = c.benchmark_group("refinement_sweep");
    let ns = [256, 512, 1024, 2048, 4096, 8192];
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| refinement_sweep(black_box(&ns), 0.25, 1e-6, exec))
        });
    }
    g.finish();
}

fn alpha(c: &mut Criterion) {
    let mut g = c.benchmark_group("alpha_sweep");
    let alphas: Vec<f64> = (0..21).map(|k| 0.25 + 0.01 * k as f64).collect();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| alpha_sweep(black_box(&alphas), 4096, exec))
        });
    }
    g.finish();
}

fn ictv(c: &mut Criterion) {
    let mut g = c.benchmark_group("ictv_sweep");
    g.sample_size(10);
    let src = IctvSource::parse("builtin:spike").unwrap();
    let ns = [256, 512, 1024, 2048];
    let opts = IctvOptions::default();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ictv_sweep(black_box(&ns), &src, 0.05, 0.1, &opts, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, refinement, alpha, ictv);
criterion_main!(benches);
