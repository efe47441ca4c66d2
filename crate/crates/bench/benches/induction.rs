use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use iet_bench::{reversal_iem, reversal_orbit, sawtooth};
use iet_core::birkhoff::{birkhoff_sum, cascade, decompose_birkhoff, evaluate_decomposition, sum_operator};
use iet_core::families::{appendix_a_orbit, appendix_b, m_matrix};
use iet_core::iterate;
use iet_core::num::q;
use iet_core::roth::{diagnose, Thresholds};

fn induction(c: &mut Criterion) {
    let t = reversal_iem(5);
    c.bench_function("rauzy orbit d=5, up to 2000 steps", |b| b.iter(|| iterate(black_box(&t), 2000)));
    c.bench_function("accelerate 30 levels d=4", |b| b.iter(|| reversal_orbit(black_box(4), 30)));
    c.bench_function("charpoly M(50)^8", |b| {
        let m = m_matrix(50).pow(8);
        b.iter(|| black_box(&m).charpoly())
    });
}

fn sums(c: &mut Criterion) {
    let a = reversal_orbit(4, 30);
    let f = sawtooth(&a);
    let t0 = a.level_iem(0).unwrap();
    let x = t0.total() * q(1, 3);
    let mut g = c.benchmark_group("sums");
    g.sample_size(20);
    g.bench_function("special sum S(0,3)", |b| b.iter(|| sum_operator(&a, 0, 3, black_box(&f)).unwrap()));
    g.bench_function("direct Birkhoff sum N=1e4", |b| b.iter(|| birkhoff_sum(&t0, &f, black_box(&x), 10_000).unwrap()));
    g.bench_function("decomposed Birkhoff sum N=1e4", |b| {
        b.iter_batched(
            || decompose_birkhoff(&a, &x, 10_000).unwrap(),
            |terms| {
                let top = terms.iter().map(|t| t.level).max().unwrap();
                let s = cascade(&a, &f, top).unwrap();
                evaluate_decomposition(&a, &s, &terms).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn diagnostics(c: &mut Criterion) {
    let th = Thresholds::default();
    let a = appendix_a_orbit(&[5; 12]).unwrap().with_proxy_lengths().unwrap();
    c.bench_function("roth diagnostics, 12 loops", |b| b.iter(|| diagnose(black_box(&a), &th).unwrap()));
    let mut g = c.benchmark_group("families");
    g.sample_size(10);
    g.bench_function("non uniquely ergodic certificate k=4", |b| b.iter(|| appendix_b(10, black_box(4), &th).unwrap()));
    g.finish();
}

criterion_group!(benches, induction, sums, diagnostics);
criterion_main!(benches);
