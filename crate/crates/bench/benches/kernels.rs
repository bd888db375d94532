use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use loglin_ins::error_dynamics::{discretize, f_left, f_right};
use loglin_ins::group::{exp_se23, log_se23};
use loglin_ins::ins::{propagate_chi, EarthModel, ImuSample};
use loglin_ins::scenario::{synth_reference, TrajectorySpec};
use loglin_ins::{Tangent, Vec3};

fn sample_tangent() -> Tangent {
    Tangent::new(Vec3::new(0.4, -1.1, 2.0), Vec3::new(12.0, -3.0, 7.5), Vec3::new(800.0, 150.0, -40.0))
}

fn group_kernels(c: &mut Criterion) {
    let xi = sample_tangent();
    let x = exp_se23(&xi);
    c.bench_function("exp_se23", |b| b.iter(|| exp_se23(black_box(&xi))));
    c.bench_function("log_se23", |b| b.iter(|| log_se23(black_box(&x)).unwrap()));
    c.bench_function("adjoint", |b| b.iter(|| black_box(&x).adjoint()));
    c.bench_function("compose", |b| b.iter(|| black_box(&x).compose(black_box(&x))));
}

fn error_model_kernels(c: &mut Criterion) {
    let imu = ImuSample::new(1.0, Vec3::new(0.01, -0.02, 0.05), Vec3::new(0.3, 0.1, 9.81));
    let earth = EarthModel::default();
    let g = Vec3::new(0.0, 0.0, -9.8);
    c.bench_function("f_left", |b| b.iter(|| f_left(black_box(&imu))));
    let f = f_right(&earth, &g, 0.0);
    c.bench_function("discretize_0.005", |b| b.iter(|| discretize(black_box(&f), 0.005).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let spec = TrajectorySpec { duration: 1.0, ..TrajectorySpec::default() };
    let earth = EarthModel::default();
    let reference = synth_reference(&spec, &earth).unwrap();
    let x0 = reference.initial_pose();
    c.bench_function("propagate_chi_200_steps", |b| {
        b.iter(|| propagate_chi(black_box(&x0), &reference, &earth, spec.step, spec.steps()).unwrap())
    });
}

criterion_group!(benches, group_kernels, error_model_kernels, propagation);
criterion_main!(benches);
