use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tdho_bench::{driven_pair, packet};
use tdho_core::classical::{self, OscState};
use tdho_core::gaussian::{evolve_moments, MomentState};
use tdho_core::grid2d::{apply_rotation, pipeline_solve, propagate_coupled, PipelineOptions};
use tdho_core::scenario::random_chain;

fn chain_integration(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate");
    for n in [1usize, 3, 8] {
        let spec = random_chain(3, n, false).unwrap();
        let init = OscState::new(vec![1.0; n], vec![0.0; n]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| classical::integrate(&spec, black_box(&init), 0.0, 20.0, 1e-10).unwrap())
        });
    }
    g.finish();
}

fn moments(c: &mut Criterion) {
    let spec = random_chain(5, 5, false).unwrap();
    let s0 = MomentState::vacuum(5);
    c.bench_function("evolve_moments n=5", |b| {
        b.iter(|| evolve_moments(&spec, black_box(&s0), 0.0, 20.0, 1e-10).unwrap())
    });
}

fn grid(c: &mut Criterion) {
    let spec = driven_pair();
    let mut g = c.benchmark_group("grid");
    g.sample_size(10);
    for n in [64usize, 128] {
        let psi = packet(n);
        g.bench_with_input(BenchmarkId::new("split_step_100", n), &n, |b, _| {
            b.iter(|| propagate_coupled(black_box(&psi), &spec, 0.0, 0.1, 1e-3).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("rotation", n), &n, |b, _| {
            b.iter(|| apply_rotation(black_box(&psi), FRAC_PI_4).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("pipeline_100", n), &n, |b, _| {
            b.iter(|| {
                pipeline_solve(&spec, black_box(&psi), 0.0, 0.1, &PipelineOptions::default())
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, chain_integration, moments, grid);
criterion_main!(benches);
