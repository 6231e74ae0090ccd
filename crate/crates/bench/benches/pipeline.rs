//! Benchmarks for the hot paths: defect evaluation, numerical range sweeps,
//! sequence-system construction, and the metric nullspace search.

use biiso_core::biortho::construct_system;
use biiso_core::defect::defect_operator;
use biiso_core::generators::{gen_finite_pair, gen_shift_pair, solve_metric};
use biiso_core::asymptotics::numerical_range;
use biiso_core::{C64, LinearOperator, WeightRule};
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dense(d: usize, seed: u64) -> LinearOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LinearOperator::dense(DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }))
}

fn bench_defect(c: &mut Criterion) {
    let cfg = gen_finite_pair(8, 3, false).unwrap();
    let p = cfg.metric.p().clone();
    c.bench_function("defect_operator 8x8 order 4", |bench| {
        bench.iter(|| defect_operator(&cfg.a, &cfg.b, &p, 4, cfg.window).unwrap())
    });
}

fn bench_numerical_range(c: &mut Criterion) {
    let a = random_dense(8, 11);
    c.bench_function("numerical_range 8x8, 256 angles", |bench| {
        bench.iter(|| numerical_range(&a, 256).unwrap())
    });
}

fn bench_construct_system(c: &mut Criterion) {
    let rule = WeightRule::Geometric { first: C64::new(1.0, 0.0), ratio: C64::new(0.5, 0.0) };
    let cfg = gen_shift_pair(rule, 160).unwrap();
    c.bench_function("construct_system n_max 64", |bench| {
        bench.iter(|| {
            construct_system(&cfg.a, &cfg.b, &cfg.metric, 64, 1e-10, cfg.window).unwrap()
        })
    });
}

fn bench_solve_metric(c: &mut Criterion) {
    let a = LinearOperator::dense(DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ));
    c.bench_function("solve_metric 2x2 order 3", |bench| {
        bench.iter(|| solve_metric(&a, &a, 3, 1e-10, 7).unwrap())
    });
}

criterion_group!(
    pipeline,
    bench_defect,
    bench_numerical_range,
    bench_construct_system,
    bench_solve_metric
);
criterion_main!(pipeline);
