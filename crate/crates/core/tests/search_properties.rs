mod common;

use std::f64::consts::PI;

use common::{modulated_seed, rel_diff};
use magcurv_core::builtins;
use magcurv_core::flow::PhaseState;
use magcurv_core::loopspace::DiscreteLoop;
use magcurv_core::solve::{
    certify, continue_in_k, gradient_search, shoot, ContinuationOptions, FailureKind, GradientSchedule, OrbitRecord,
    RecordOptions, SearchOutcome, ShootOptions,
};
use magcurv_core::solve::record::CLOSURE_GATE;
use proptest::prelude::*;

fn light_options(nodes: usize, modes: usize) -> ShootOptions {
    ShootOptions { record: RecordOptions { nodes, modes: Some(modes), ..RecordOptions::default() }, ..ShootOptions::default() }
}

fn found(outcome: SearchOutcome) -> OrbitRecord {
    match outcome {
        SearchOutcome::Found(r) => *r,
        SearchOutcome::NotFound(f) => panic!("{}", f.message),
    }
}

fn assert_record_invariants(r: &OrbitRecord) {
    assert!(r.is_certified());
    assert!(r.period > 0.0);
    assert!(r.energy_residual < 1e-8, "energy {}", r.energy_residual);
    assert!(r.closure_residual < CLOSURE_GATE, "closure {}", r.closure_residual);
    assert!(r.eta.norm < r.eta.gate);
    assert!(r.min_sec <= r.min_ric + 1e-12, "one-dimensional complement on surfaces");
    let v = r.initial_v.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!((0.5 * v * v - r.k).abs() < 1e-12 * (1.0 + r.k));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn constant_field_circles_are_found(b in 0.5f64..2.0, k in 0.05f64..2.0, angle in 0.0f64..6.3, x in [0.0f64..6.0, 0.0f64..6.0]) {
        let sys = builtins::flat_torus(b);
        let s = (2.0 * k).sqrt();
        let seed = PhaseState::new(x.to_vec(), vec![s * angle.cos(), s * angle.sin()]);
        let r = found(shoot(&sys, k, &seed, 0.9 * 2.0 * PI / b, &light_options(128, 4)).unwrap());
        assert_record_invariants(&r);
        prop_assert!((r.period - 2.0 * PI / b).abs() < 1e-6, "period {}", r.period);
        prop_assert_eq!(&r.winding, &vec![0, 0]);
        prop_assert!(r.contractible);
        prop_assert_eq!(r.morse(), Some(1));
    }
}

#[test]
fn shooting_and_gradient_search_agree() {
    let sys = builtins::flat_torus(1.0);
    let shot = found(shoot(&sys, 0.5, &PhaseState::new(vec![1.0, 1.0], vec![1.0, 0.0]), 6.0, &light_options(128, 4)).unwrap());
    let initial = DiscreteLoop::circle(&[1.0, 1.0], 0.5, 3.0, 128, false).unwrap();
    let schedule = GradientSchedule { shoot: light_options(128, 4), ..GradientSchedule::default() };
    let descended = found(gradient_search(&sys, 0.5, &initial, &schedule).unwrap());
    assert_record_invariants(&descended);
    assert!((shot.period - descended.period).abs() < 1e-6);
    assert_eq!(descended.winding, vec![0, 0]);
}

#[test]
fn field_free_torus_has_no_contractible_orbit() {
    let sys = builtins::flat_torus(0.0);
    let out = shoot(&sys, 0.5, &PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]), 6.0, &light_options(64, 4)).unwrap();
    let failure = out.failure().expect("no closed contractible geodesic exists");
    assert!(failure.message.starts_with("closed orbit not found"));
    assert_ne!(failure.kind, FailureKind::Uncertified);
}

#[test]
fn torus_family_attains_the_bonnet_myers_bound() {
    let sys = builtins::flat_torus(1.0);
    let start = found(shoot(&sys, 0.1, &PhaseState::new(vec![0.0, 0.0], vec![0.2f64.sqrt(), 0.0]), 6.0, &light_options(128, 8)).unwrap());
    let options = ContinuationOptions { shoot: light_options(128, 8), ..ContinuationOptions::default() };
    let family = continue_in_k(&sys, &start, &[0.1, 0.25, 0.5, 1.0, 2.0], &options).unwrap();
    assert!(family.truncated.is_none(), "{:?}", family.truncated);
    assert_eq!(family.records.len(), 5);
    for r in &family.records {
        assert_record_invariants(r);
        let cert = certify(&sys, r).unwrap();
        assert!(cert.passed, "k = {}", r.k);
        let bm = cert.check("bonnet_myers").unwrap();
        // T = 2π equals rπ(m+1) with r = 1, m = 1
        assert!(bm.margin.abs() < 1e-6, "margin {}", bm.margin);
        assert!(!cert.check("synge").unwrap().applicable || cert.check("synge").unwrap().passed);
    }
}

#[test]
fn modulated_family_certifies_across_the_sweep() {
    let sys = builtins::modulated_torus(1.0, 0.2);
    for k in [0.1, 0.25, 0.5, 1.0, 2.0] {
        let r = found(shoot(&sys, k, &modulated_seed(k), 2.0 * PI, &light_options(256, 16)).unwrap());
        assert_record_invariants(&r);
        let cert = certify(&sys, &r).unwrap();
        assert!(cert.passed, "k = {k}: {:?}", cert.checks);
        assert_eq!(r.morse(), Some(1));
        assert!(rel_diff(r.period, 2.0 * PI) < 0.2);
    }
}

#[test]
fn sphere_great_circle_satisfies_synge() {
    let sys = builtins::round_sphere(0.0);
    let r = found(shoot(&sys, 0.5, &PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0]), 6.0, &light_options(256, 16)).unwrap());
    assert!((r.period - 2.0 * PI).abs() < 1e-6);
    let cert = certify(&sys, &r).unwrap();
    let synge = cert.check("synge").unwrap();
    assert!(synge.applicable && synge.passed);
    assert!((r.min_sec - 1.0).abs() < 1e-9);
}
