use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use cfzero::circuit::{find_circuit_features, s11_rational};
use cfzero::poly::{roots, Poly};
use cfzero::response::{bloch_features, FeatureKind};
use cfzero::{BlochParams, CircuitParams};

fn bench_roots(c: &mut Criterion) {
    let bloch = BlochParams::reference();
    let circuit = CircuitParams::reference();

    c.bench_function("bloch_features", |b| {
        b.iter(|| bloch_features(black_box(&bloch)).unwrap())
    });
    c.bench_function("circuit_zeros", |b| {
        b.iter(|| find_circuit_features(black_box(&circuit), FeatureKind::Zero).unwrap())
    });

    let den = s11_rational(&circuit).unwrap().den.clone();
    c.bench_function("aberth_degree7", |b| {
        b.iter_batched(|| den.clone(), |p: Poly| roots(&p).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, bench_roots);
criterion_main!(benches);
