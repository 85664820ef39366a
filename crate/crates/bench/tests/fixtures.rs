use magcurv_bench::{modulated_seed, tangent_samples, torus_loop};
use magcurv_core::builtins;
use magcurv_core::loopspace::eta_residual;

#[test]
fn torus_loop_is_critical() {
    let (sys, lp) = torus_loop(128).unwrap();
    assert_eq!(lp.len(), 128);
    assert!(eta_residual(&sys, &lp, 0.5).unwrap().passes());
}

#[test]
fn seeds_lie_on_their_energy_level() {
    for k in [0.1, 0.5, 2.0] {
        let s = modulated_seed(k);
        assert!((s.energy(&builtins::modulated_torus(1.0, 0.2)).unwrap() - k).abs() < 1e-14);
    }
}

#[test]
fn samples_are_unit() {
    for (p, v) in tangent_samples(&builtins::flat_torus(1.0), 16).unwrap() {
        assert!((p.norm(&v) - 1.0).abs() < 1e-12);
    }
}
