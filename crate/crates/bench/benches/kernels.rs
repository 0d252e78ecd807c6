use std::hint::black_box;

use alphasplit_core::{
    build_model, enumerate_group, ground_space, schmidt_spectrum, CompiledOperator,
    LatticeGeometry, PerturbationSpec, SolverConfig, StateVector,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn matvec(c: &mut Criterion) {
    let geom = LatticeGeometry::torus(3, 3).unwrap();
    let h = build_model(
        &geom,
        &PerturbationSpec::UniformXz {
            lambda_x: 0.2,
            lambda_z: 0.1,
        },
    )
    .unwrap();
    let op = CompiledOperator::new(&h, geom.n_edges()).unwrap();
    let v = StateVector::random(geom.n_edges(), 1);
    let mut out = vec![0.0; op.dim()];
    c.bench_function("matvec torus(3,3)", |b| {
        b.iter(|| op.apply_into(black_box(v.amplitudes()), &mut out).unwrap())
    });
}

fn ground(c: &mut Criterion) {
    let geom = LatticeGeometry::torus(3, 2).unwrap();
    let h = build_model(&geom, &PerturbationSpec::CcExp { lambda: 0.3 }).unwrap();
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("ground_space");
    g.sample_size(10);
    g.bench_function("cc torus(3,2) k=4", |b| {
        b.iter(|| ground_space(black_box(&h), geom.n_edges(), &cfg).unwrap())
    });
    g.finish();
}

fn schmidt(c: &mut Criterion) {
    let geom = LatticeGeometry::torus(3, 3).unwrap();
    let v = StateVector::random(geom.n_edges(), 7);
    let star = geom.default_star_plaquette().unwrap();
    let half = geom.region_half().unwrap();
    c.bench_function("schmidt star+plaquette torus(3,3)", |b| {
        b.iter(|| schmidt_spectrum(black_box(&v), &star).unwrap())
    });
    c.bench_function("schmidt half torus(3,3)", |b| {
        b.iter(|| schmidt_spectrum(black_box(&v), &half).unwrap())
    });
}

fn group(c: &mut Criterion) {
    let geom = LatticeGeometry::torus(4, 4).unwrap();
    c.bench_function("enumerate_group torus(4,4)", |b| {
        b.iter(|| enumerate_group(black_box(&geom)).unwrap())
    });
}

criterion_group!(benches, matvec, ground, schmidt, group);
criterion_main!(benches);
