use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use corrkit::algebra::BellFunctional;
use corrkit::group::{check_freeness, FreeWitness, Signature, DEFAULT_BALL_CAP};
use corrkit::linalg::C64;
use corrkit::norms::{NormElement, RepKind, TruncatedRep};
use corrkit::npa::{self, Level, NpaOptions};
use corrkit::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn truncated_apply(c: &mut Criterion) {
    let sig = Signature::free(2).unwrap();
    let rep = TruncatedRep::new(&sig, 10, RepKind::LeftRegular, DEFAULT_BALL_CAP).unwrap();
    let el = NormElement::parse(&sig, RepKind::LeftRegular, "a + a^-1 + b + b^-1").unwrap();
    let op = rep.compress(&el, Execution::Parallel).unwrap();
    let v: Vec<C64> = (0..rep.dim()).map(|i| C64::new((i as f64).sin(), 0.0)).collect();
    let mut group = c.benchmark_group("truncated_apply_r10");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| op.apply(black_box(&v), exec).unwrap())
        });
    }
    group.finish();
}

fn freeness(c: &mut Criterion) {
    let w = FreeWitness::three_z2().unwrap();
    let mut group = c.benchmark_group("check_freeness_len7");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| check_freeness(black_box(&w), 7, DEFAULT_BALL_CAP, exec).unwrap())
        });
    }
    group.finish();
}

fn npa_batch(c: &mut Criterion) {
    let problems: Vec<_> = (0..8)
        .map(|i| {
            let mut f = BellFunctional::chsh();
            f.set(0, 0, 0, 0, 0.1 * i as f64).unwrap();
            npa::build_bound_problem(&f, Level::OneAB, npa::DEFAULT_BASIS_CAP).unwrap()
        })
        .collect();
    let opts = NpaOptions::default();
    let mut group = c.benchmark_group("npa_solve_all_8");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| npa::solve_all(black_box(&problems), &opts, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, truncated_apply, freeness, npa_batch);
criterion_main!(benches);
