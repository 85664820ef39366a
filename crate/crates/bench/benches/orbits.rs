use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use magcurv_bench::{modulated_seed, torus_loop, torus_seed};
use magcurv_core::builtins;
use magcurv_core::flow::{integrate, IntegrateOptions};
use magcurv_core::loopspace::{morse_index, IndexOptions};
use magcurv_core::solve::{shoot, RecordOptions, ShootOptions};

fn orbits(c: &mut Criterion) {
    let modulated = builtins::modulated_torus(1.0, 0.2);
    let seed = modulated_seed(0.5);
    c.bench_function("integrate/100 periods tol 1e-10", |b| {
        b.iter(|| integrate(&modulated, black_box(&seed), 200.0 * PI, &IntegrateOptions::new(1e-10)).unwrap())
    });

    let mut group = c.benchmark_group("morse_index");
    group.sample_size(10);
    for (nodes, modes) in [(256, 16), (512, 32)] {
        let (sys, lp) = torus_loop(nodes).unwrap();
        group.bench_function(format!("torus N={nodes} m={modes}"), |b| {
            b.iter(|| morse_index(&sys, &lp, 0.5, &IndexOptions::new(modes)).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("shoot");
    group.sample_size(10);
    let options = ShootOptions { record: RecordOptions::default().without_index(), ..ShootOptions::default() };
    let torus = builtins::flat_torus(1.0);
    group.bench_function("torus k=0.5", |b| b.iter(|| shoot(&torus, 0.5, &torus_seed(), 6.0, &options).unwrap()));
    group.bench_function("modulated k=0.5", |b| b.iter(|| shoot(&modulated, 0.5, &seed, 2.0 * PI, &options).unwrap()));
    group.finish();
}

criterion_group!(benches, orbits);
criterion_main!(benches);
