mod common;

use std::f64::consts::PI;

use common::{benchmarks, fourier_variation, rel_diff};
use magcurv_core::builtins;
use magcurv_core::loopspace::{
    action, eta_k, make_test_variation, morse_index, transported_frame, DiscreteLoop, HessianContext, IndexFrame,
    IndexOptions, LoopKinematics, Variation,
};
use magcurv_core::nalgebra::DVector;
use proptest::prelude::*;

/// `Q` as a quadratic form of size `‖V‖² + ‖DV‖² + τ²`, so that near-zero values are compared on scale.
fn h1_scale(ctx: &HessianContext, lp: &DiscreteLoop, var: &Variation) -> f64 {
    let d = var.covariant_derivative(lp, &ctx.kinematics);
    let h = lp.step();
    let c = &ctx.kinematics.connections;
    h * (0..lp.len()).map(|i| c[i].norm_sq(&var.v[i]) + c[i].norm_sq(&d[i])).sum::<f64>() + var.tau * var.tau
}

#[test]
fn velocity_is_in_the_kernel() {
    for b in benchmarks(256) {
        let kin = LoopKinematics::new(&b.sys, &b.lp).unwrap();
        let ctx = HessianContext::new(&b.sys, &b.lp, b.k).unwrap();
        let var = Variation::new(kin.velocity.clone(), 0.0);
        let q = ctx.form(&b.lp, &var).unwrap();
        let qc = ctx.curvature_form(&b.lp, &var).unwrap();
        assert!(q.abs() < 1e-8 && qc.abs() < 1e-8, "{}: {q} {qc}", b.name);
    }
}

#[test]
fn hessian_forms_agree_on_fourier_variations() {
    for b in benchmarks(256) {
        let ctx = HessianContext::new(&b.sys, &b.lp, b.k).unwrap();
        for seed in 0..25 {
            let var = fourier_variation(&b.lp, 4, seed);
            let q = ctx.form(&b.lp, &var).unwrap();
            let qc = ctx.curvature_form(&b.lp, &var).unwrap();
            assert!(rel_diff(q, qc) < 1e-6, "{} seed {seed}: {q} vs {qc}", b.name);
            assert!((q - qc).abs() < 1e-9 * h1_scale(&ctx, &b.lp, &var));
        }
    }
}

#[test]
fn test_variation_kills_the_last_square() {
    for b in benchmarks(256) {
        let kin = LoopKinematics::new(&b.sys, &b.lp).unwrap();
        let raw = fourier_variation(&b.lp, 3, 7);
        // project out the tangential part, which make_test_variation requires
        let normal: Vec<DVector<f64>> = raw
            .v
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let (c, gd) = (&kin.connections[i], &kin.velocity[i]);
                w - gd * (c.inner(w, gd) / c.norm_sq(gd))
            })
            .collect();
        let var = make_test_variation(&b.sys, &b.lp, &Variation::new(normal, 0.0)).unwrap();
        let d = var.covariant_derivative(&b.lp, &kin);
        for (i, di) in d.iter().enumerate() {
            let (c, gd) = (&kin.connections[i], &kin.velocity[i]);
            let speed = c.norm(gd);
            let last = c.inner(di, gd) / speed - var.tau / b.lp.period * speed;
            assert!(last.abs() < 1e-8, "{} node {i}: {last}", b.name);
        }
        let tangential = Variation::new(kin.velocity.clone(), 0.0);
        assert!(make_test_variation(&b.sys, &b.lp, &tangential).is_err());
    }
}

#[test]
fn eta_matches_finite_difference_action_gradient() {
    // off-critical loops: a small circle on the torus and an ellipse-like loop on the modulated torus
    let cases = [
        (builtins::flat_torus(1.0), DiscreteLoop::circle(&[1.0, 1.0], 0.5, 4.0, 128, false).unwrap()),
        (builtins::modulated_torus(1.0, 0.2), DiscreteLoop::circle(&[2.0, 0.5], 0.8, 5.0, 128, true).unwrap()),
    ];
    for (sys, lp) in cases {
        for seed in 0..5 {
            let var = fourier_variation(&lp, 3, seed);
            let k = 0.7;
            let eps = 1e-5;
            let fd = (action(&sys, &lp.perturbed(&var.v, var.tau, eps), k).unwrap()
                - action(&sys, &lp.perturbed(&var.v, var.tau, -eps), k).unwrap())
                / (2.0 * eps);
            let eta = eta_k(&sys, &lp, k, &var).unwrap();
            assert!(rel_diff(eta, fd) < 1e-5, "{eta} vs {fd}");
        }
    }
}

#[test]
fn hessian_matches_second_differences_of_the_action() {
    for b in benchmarks(256) {
        let ctx = HessianContext::new(&b.sys, &b.lp, b.k).unwrap();
        let base = action(&b.sys, &b.lp, b.k).unwrap();
        for seed in 0..5 {
            let var = fourier_variation(&b.lp, 3, 100 + seed);
            let eps = 1e-3;
            let plus = action(&b.sys, &b.lp.perturbed(&var.v, var.tau, eps), b.k).unwrap();
            let minus = action(&b.sys, &b.lp.perturbed(&var.v, var.tau, -eps), b.k).unwrap();
            let second = (plus - 2.0 * base + minus) / (eps * eps);
            let q = ctx.form(&b.lp, &var).unwrap();
            assert!(rel_diff(q, second) < 1e-4, "{} seed {seed}: {q} vs {second}", b.name);
        }
    }
}

#[test]
fn index_is_frame_and_resolution_independent() {
    for (b, fine) in benchmarks(256).into_iter().zip(benchmarks(512)) {
        let coarse = morse_index(&b.sys, &b.lp, b.k, &IndexOptions::new(16)).unwrap();
        let refined = morse_index(&fine.sys, &fine.lp, fine.k, &IndexOptions::new(32)).unwrap();
        let transported =
            morse_index(&b.sys, &b.lp, b.k, &IndexOptions::new(16).with_frame(IndexFrame::Transported)).unwrap();
        assert_eq!(coarse.negative, 1, "{}", b.name);
        assert_eq!(refined.negative, coarse.negative, "{}", b.name);
        assert_eq!(transported.negative, coarse.negative, "{}", b.name);
    }
}

#[test]
fn transported_frame_closes_on_the_torus_circle() {
    let b = benchmarks(128).remove(0);
    let frame = transported_frame(&b.sys, &b.lp).unwrap();
    assert!(frame.closure_error < 1e-8, "{}", frame.closure_error);
    assert!((b.lp.period - 2.0 * PI).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hessian_is_a_quadratic_form(seed in 0u64..10_000, s in -3.0f64..3.0) {
        let b = benchmarks(64).remove(2);
        let ctx = HessianContext::new(&b.sys, &b.lp, b.k).unwrap();
        let (u, w) = (fourier_variation(&b.lp, 2, seed), fourier_variation(&b.lp, 2, seed + 1));
        let q = |v: &Variation| ctx.form(&b.lp, v).unwrap();
        let scale = h1_scale(&ctx, &b.lp, &u) + h1_scale(&ctx, &b.lp, &w);
        prop_assert!((q(&u.scaled(s)) - s * s * q(&u)).abs() < 1e-10 * scale * (1.0 + s * s));
        // parallelogram law
        let lhs = q(&u.add(&w)) + q(&u.add(&w.scaled(-1.0)));
        prop_assert!((lhs - 2.0 * (q(&u) + q(&w))).abs() < 1e-10 * scale);
    }
}
