use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use isac_twin_bench::{random_hermitian, sdp_instance};
use isac_twin_core::numerics::herm_eig;
use isac_twin_core::sdp::{solve_isac_sdp, SdpOptions};
use isac_twin_core::sim::{run_trial, ExperimentConfig, TargetSample, UserSample};
use isac_twin_core::{RayTracer, Scene, Vec3};

fn eig(c: &mut Criterion) {
    let a = random_hermitian(16, 1);
    c.bench_function("herm_eig_16x16", |b| {
        b.iter(|| herm_eig(black_box(&a)).unwrap())
    });
}

fn sdp(c: &mut Criterion) {
    let p = sdp_instance(16, 2);
    let opts = SdpOptions::default();
    c.bench_function("solve_isac_sdp_16", |b| {
        b.iter(|| solve_isac_sdp(black_box(&p), &opts).unwrap())
    });
}

fn trace(c: &mut Criterion) {
    let scene = Scene::canonical();
    let tracer = RayTracer::new(&scene);
    let target = Vec3::new(10.0, 30.0, 1.0);
    c.bench_function("trace_bs_to_target", |b| {
        b.iter(|| {
            tracer
                .trace_point_to_point(scene.bs.position, black_box(target), 2)
                .unwrap()
        })
    });
    c.bench_function("partial_trace_and_compose", |b| {
        b.iter(|| {
            let partial = tracer.partial_trace(black_box(target), 2).unwrap();
            tracer
                .compose_from_partial(&partial, target, 0.785)
                .unwrap()
        })
    });
}

fn trial(c: &mut Criterion) {
    let scene = Scene::canonical();
    let tracer = RayTracer::new(&scene);
    let tx = scene.bs.tx_array.geometry();
    let rx = scene.bs.rx_array.geometry();
    let cfg = ExperimentConfig::desk("canonical");
    let user = UserSample::trace(&tracer, &tx, Vec3::new(20.0, 10.0, 1.5), 2).unwrap();
    let target =
        TargetSample::trace(&tracer, &tx, &rx, Vec3::new(10.0, 30.0, 1.0), cfg.rcs_m2, 2).unwrap();
    c.bench_function("trial_four_strategies", |b| {
        b.iter(|| run_trial(0, &tx, black_box(&user), black_box(&target), &cfg).unwrap())
    });
}

criterion_group!(benches, eig, sdp, trace, trial);
criterion_main!(benches);
