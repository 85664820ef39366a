#![allow(dead_code)]

use std::sync::Arc;

use magcurv_core::geom::sampling::{random_unit, random_unit_orthogonal, seeded_rng};
use magcurv_core::nalgebra::{DMatrix, DVector};
use magcurv_core::{ChartedSystem, PointGeometry};
use rand::Rng;

/// Coefficients of a smooth 3-dimensional system with a varying metric and
/// the exact two-form `σ = dθ`, `θ_j = Σ_m A[j][m] sin(x_m + φ[j][m]) + B_j sin(c_j·x)`.
#[derive(Debug, Clone)]
pub struct RandomField {
    pub amp: [[f64; 3]; 3],
    pub phase: [[f64; 3]; 3],
    pub bend: [f64; 3],
    pub wave_amp: [f64; 3],
    pub wave: [[f64; 3]; 3],
}

impl RandomField {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let mut amp = [[0.0; 3]; 3];
        let mut phase = [[0.0; 3]; 3];
        for j in 0..3 {
            for m in 0..3 {
                amp[j][m] = draw(-1.0, 1.0);
                phase[j][m] = draw(0.0, 6.0);
            }
        }
        let bend = [draw(0.05, 0.3), draw(0.05, 0.3), draw(0.05, 0.3)];
        let wave_amp = [draw(-0.5, 0.5), draw(-0.5, 0.5), draw(-0.5, 0.5)];
        let mut wave = [[0.0; 3]; 3];
        for row in &mut wave {
            for c in row.iter_mut() {
                *c = draw(-1.5, 1.5);
            }
        }
        Self { amp, phase, bend, wave_amp, wave }
    }

    pub fn metric(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::identity(3, 3);
        for i in 0..3 {
            let s = (x[i] + x[(i + 1) % 3]).sin();
            g[(i, i)] += self.bend[i] * s * s;
            for j in 0..3 {
                if i != j {
                    g[(i, j)] = 0.1 * (x[i] - x[j]).cos() * (x[i] * x[j]).cos();
                }
            }
        }
        g
    }

    pub fn two_form(&self, x: &DVector<f64>) -> DMatrix<f64> {
        // ∂_i θ_j = A[j][i] cos(x_i + φ[j][i]) + B_j c_j[i] cos(c_j·x)
        let dot = |c: &[f64; 3]| c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
        let d = |i: usize, j: usize| {
            self.amp[j][i] * (x[i] + self.phase[j][i]).cos() + self.wave_amp[j] * self.wave[j][i] * dot(&self.wave[j]).cos()
        };
        DMatrix::from_fn(3, 3, |i, j| d(i, j) - d(j, i))
    }

    pub fn system(&self) -> ChartedSystem {
        let (a, b) = (self.clone(), self.clone());
        ChartedSystem::new("random3", 3, Arc::new(move |x| Ok(a.metric(x))), Arc::new(move |x| Ok(b.two_form(x)))).unwrap()
    }
}

pub fn point(v: [f64; 3]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

/// A point geometry together with a random g-unit `v` and a unit `w ⟂ v`.
pub fn unit_pair(p: &PointGeometry, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = seeded_rng(seed);
    let v = random_unit(p, &mut rng).unwrap();
    let w = random_unit_orthogonal(p, &v, &mut rng).unwrap();
    (v, w)
}

pub fn random_vector(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = seeded_rng(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

use std::f64::consts::PI;

use magcurv_core::flow::PhaseState;
use magcurv_core::loopspace::{DiscreteLoop, Variation};
use magcurv_core::solve::{shoot, RecordOptions, ShootOptions};
use magcurv_core::builtins;

/// A critical loop with its system and energy.
pub struct Benchmark {
    pub name: &'static str,
    pub sys: ChartedSystem,
    pub lp: DiscreteLoop,
    pub k: f64,
}

/// Unit circle on the `b = 1` torus, the sphere's equator (both at `k = ½`)
/// and the shot orbit of the modulated torus at `k = ½`.
pub fn benchmarks(nodes: usize) -> Vec<Benchmark> {
    let torus = builtins::flat_torus(1.0);
    let (torus_loop, _) =
        DiscreteLoop::sample_orbit(&torus, &PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]), 2.0 * PI, nodes, 1e-13)
            .unwrap();
    let sphere = builtins::round_sphere(0.0);
    let (sphere_loop, _) =
        DiscreteLoop::sample_orbit(&sphere, &PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0]), 2.0 * PI, nodes, 1e-13)
            .unwrap();
    let modulated = builtins::modulated_torus(1.0, 0.2);
    let record = modulated_orbit(&modulated, 0.5, nodes);
    vec![
        Benchmark { name: "torus", sys: torus, lp: torus_loop, k: 0.5 },
        Benchmark { name: "sphere", sys: sphere, lp: sphere_loop, k: 0.5 },
        Benchmark { name: "modulated", sys: modulated, lp: record, k: 0.5 },
    ]
}

pub fn modulated_seed(k: f64) -> PhaseState {
    let s = (2.0 * k).sqrt();
    PhaseState::new(vec![PI / 2.0 - s, 0.0], vec![0.0, s])
}

pub fn modulated_orbit(sys: &ChartedSystem, k: f64, nodes: usize) -> DiscreteLoop {
    let options = ShootOptions { record: RecordOptions { nodes, ..RecordOptions::default() }.without_index(), ..ShootOptions::default() };
    let outcome = shoot(sys, k, &modulated_seed(k), 2.0 * PI, &options).unwrap();
    outcome.into_record().expect("modulated torus orbit").discrete
}

/// Smooth periodic field with `modes` random Fourier modes per coordinate.
pub fn fourier_variation(lp: &DiscreteLoop, modes: usize, seed: u64) -> Variation {
    let mut rng = seeded_rng(seed);
    let n = lp.dim();
    let coeffs: Vec<(f64, f64)> = (0..n * (modes + 1)).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let tau = rng.random_range(-1.0..1.0);
    let count = lp.len();
    let v = (0..count)
        .map(|i| {
            let s = 2.0 * PI * i as f64 / count as f64;
            DVector::from_fn(n, |d, _| {
                (0..=modes)
                    .map(|m| {
                        let (a, b) = coeffs[d * (modes + 1) + m];
                        let f = m as f64 * s;
                        a * f.cos() + b * f.sin()
                    })
                    .sum()
            })
        })
        .collect();
    Variation::new(v, tau)
}

/// Conformal surface `g = e^{2φ}δ`, `σ = f dx¹∧dx²` with finite-difference derivatives.
pub fn conformal_surface(c: [f64; 4]) -> ChartedSystem {
    let phi = move |x: &DVector<f64>| 0.3 * (c[0] * x[0] + c[1] * x[1]).sin();
    let f = move |x: &DVector<f64>| c[2] + 0.5 * (x[0] - c[3] * x[1]).cos();
    ChartedSystem::new(
        "conformal",
        2,
        Arc::new(move |x| Ok(DMatrix::identity(2, 2) * (2.0 * phi(x)).exp())),
        Arc::new(move |x| Ok(DMatrix::from_row_slice(2, 2, &[0.0, f(x), -f(x), 0.0]))),
    )
    .unwrap()
}
