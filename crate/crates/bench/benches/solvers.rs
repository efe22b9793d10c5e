use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use foa_core::optical_flow::horn_schunck;
use foa_core::potential::{evolve_potential, poisson_solve};
use foa_core::synth::{blobs, gaussian_blob, translating_blob};
use foa_core::{run_simulation, Boundary, FrameSequence, HsParams, PotentialState, SimConfig, TelegraphParams};

fn poisson(c: &mut Criterion) {
    let mu = blobs(64, 64, &[[20.0, 28.0], [44.0, 38.0]], 3.0);
    c.bench_function("poisson_solve 64x64", |b| {
        b.iter(|| poisson_solve(black_box(&mu), 1.0, 1e-8, 100_000, &Boundary::DirichletZero).unwrap())
    });
}

fn flow(c: &mut Criterion) {
    let frames = translating_blob(64, 64, [30.0, 32.0], [10.0, 0.0], 4.0, 2, 0.1);
    let p = HsParams {
        max_iters: 500,
        tol: 1e-12,
        ..HsParams::default()
    };
    c.bench_function("horn_schunck 64x64 x500", |b| {
        b.iter(|| horn_schunck(black_box(&frames[0]), &frames[1], 0.1, &p).unwrap())
    });
}

fn telegraph(c: &mut Criterion) {
    let mu = gaussian_blob(128, 128, [64.0, 64.0], 6.0);
    let p = TelegraphParams::default();
    let state = PotentialState::zeros(128, 128);
    c.bench_function("evolve_potential 128x128", |b| {
        b.iter(|| evolve_potential(black_box(&state), &mu, &p).unwrap())
    });
}

fn pipeline(c: &mut Criterion) {
    let img = blobs(64, 64, &[[20.0, 28.0], [44.0, 38.0]], 2.0);
    let seq = FrameSequence::new(vec![img; 26], 0.04).unwrap();
    let mut cfg = SimConfig::default();
    cfg.mass.alpha1 = 2000.0;
    cfg.ior_beta = 3.0;
    c.bench_function("run_simulation 64x64 1s", |b| {
        b.iter(|| run_simulation(black_box(&seq), &cfg).unwrap())
    });
}

criterion_group!(benches, poisson, flow, telegraph, pipeline);
criterion_main!(benches);
