//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use magcurv_core::flow::PhaseState;
use magcurv_core::geom::sampling::{halton_points, random_unit, seeded_rng, SampleBox};
use magcurv_core::loopspace::DiscreteLoop;
use magcurv_core::nalgebra::DVector;
use magcurv_core::{builtins, ChartedSystem, PointGeometry, Result};

/// Seed on the unit circle orbit of the `b = 1` torus at `k = ½`.
pub fn torus_seed() -> PhaseState {
    PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0])
}

/// Seed of the closed orbit of `b = 1 + 0.2 sin x¹` at energy `k`.
pub fn modulated_seed(k: f64) -> PhaseState {
    let s = (2.0 * k).sqrt();
    PhaseState::new(vec![PI / 2.0 - s, 0.0], vec![0.0, s])
}

/// `count` point geometries with unit directions on the fundamental domain of `sys`.
pub fn tangent_samples(sys: &ChartedSystem, count: usize) -> Result<Vec<(PointGeometry, DVector<f64>)>> {
    let region = SampleBox::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI])?;
    let mut rng = seeded_rng(3);
    halton_points(&region, count, 3)?
        .into_iter()
        .map(|x| {
            let p = PointGeometry::at(sys, &x)?;
            let v = random_unit(&p, &mut rng)?;
            Ok((p, v))
        })
        .collect()
}

/// The torus benchmark orbit sampled at `nodes` nodes.
pub fn torus_loop(nodes: usize) -> Result<(ChartedSystem, DiscreteLoop)> {
    let sys = builtins::flat_torus(1.0);
    let (lp, _) = DiscreteLoop::sample_orbit(&sys, &torus_seed(), 2.0 * PI, nodes, 1e-13)?;
    Ok((sys, lp))
}
