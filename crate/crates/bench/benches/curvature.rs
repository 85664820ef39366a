use criterion::{criterion_group, criterion_main, Criterion};
use magcurv_bench::tangent_samples;
use magcurv_core::builtins;
use magcurv_core::magcurv::{min_sec_omega_k, ric_omega_k};
use magcurv_core::nalgebra::DVector;
use magcurv_core::PointGeometry;
use std::hint::black_box;

fn curvature(c: &mut Criterion) {
    let analytic = builtins::modulated_torus(1.0, 0.2);
    let fd = analytic
        .clone()
        .with_scheme(magcurv_core::DerivativeScheme::finite_difference(magcurv_core::DerivativeScheme::DEFAULT_STEP))
        .unwrap();
    let samples = tangent_samples(&analytic, 256).unwrap();

    c.bench_function("ric_omega_k/256 samples", |b| {
        b.iter(|| samples.iter().map(|(p, v)| ric_omega_k(p, v, black_box(0.5)).unwrap()).sum::<f64>())
    });
    c.bench_function("min_sec_omega_k/256 samples", |b| {
        b.iter(|| samples.iter().map(|(p, v)| min_sec_omega_k(p, v, black_box(0.5)).unwrap()).fold(f64::INFINITY, f64::min))
    });
    let x = DVector::from_vec(vec![1.1, 0.4]);
    c.bench_function("point_geometry/analytic", |b| b.iter(|| PointGeometry::at(&analytic, black_box(&x)).unwrap()));
    c.bench_function("point_geometry/finite_difference", |b| b.iter(|| PointGeometry::at(&fd, black_box(&x)).unwrap()));
}

criterion_group!(benches, curvature);
criterion_main!(benches);
