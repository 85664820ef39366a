use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::flow::{integrate, IntegrateOptions, Orbit, PhaseState};
use crate::geom::{ChartedSystem, Connection, Coords, PointGeometry};

/// Eighth-order central first-derivative weights for offsets −4..=4.
pub const FIRST_DERIVATIVE: [f64; 9] = [
    1.0 / 280.0,
    -4.0 / 105.0,
    1.0 / 5.0,
    -4.0 / 5.0,
    0.0,
    4.0 / 5.0,
    -1.0 / 5.0,
    4.0 / 105.0,
    -1.0 / 280.0,
];

/// Eighth-order central second-derivative weights for offsets −4..=4.
pub const SECOND_DERIVATIVE: [f64; 9] = [
    -1.0 / 560.0,
    8.0 / 315.0,
    -1.0 / 5.0,
    8.0 / 5.0,
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

pub const MIN_NODES: usize = 8;

/// Speeds at or below this count as stalled regardless of scale.
pub const STALL_SPEED: f64 = 1e-12;

/// The chart system a loop lives in.
pub fn chart_system(sys: &ChartedSystem, chart: usize) -> Result<&ChartedSystem> {
    match chart {
        0 => Ok(sys),
        1 => sys.transition().map(|t| t.alternate.as_ref()).ok_or(Error::MultiChart),
        _ => Err(Error::MultiChart),
    }
}

/// Closed polyline with free period. Nodes are stored on a continuous lift:
/// node `i + N` is node `i` translated by `shift` (lattice winding).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    pub nodes: Vec<Coords>,
    pub period: f64,
    pub winding: Vec<i64>,
    pub shift: DVector<f64>,
    pub chart: usize,
}

impl DiscreteLoop {
    pub fn new(nodes: Vec<Coords>, period: f64) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidInput(format!("a loop needs at least {MIN_NODES} nodes")));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidInput("loop period must be positive".into()));
        }
        let n = nodes[0].len();
        if nodes.iter().any(|x| x.len() != n) {
            return Err(Error::Dimension { expected: n, got: nodes.iter().map(|x| x.len()).find(|&l| l != n).unwrap() });
        }
        if nodes.iter().any(|x| x.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput("non-finite loop node".into()));
        }
        Ok(Self { nodes, period, winding: vec![0; n], shift: DVector::zeros(n), chart: 0 })
    }

    /// Attach a lattice winding vector; the lift then closes up to `Σ w_d L_d e_d`.
    pub fn with_winding(mut self, sys: &ChartedSystem, winding: Vec<i64>) -> Result<Self> {
        if winding.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: winding.len() });
        }
        let mut shift = DVector::zeros(self.dim());
        for (d, (&w, l)) in winding.iter().zip(sys.lattice()).enumerate() {
            match l {
                Some(l) => shift[d] = w as f64 * l,
                None if w != 0 => {
                    return Err(Error::InvalidInput(format!("winding along non-periodic axis {d}")));
                }
                None => {}
            }
        }
        self.winding = winding;
        self.shift = shift;
        Ok(self)
    }

    pub fn with_chart(mut self, chart: usize) -> Self {
        self.chart = chart;
        self
    }

    /// Circle `center + r(cos φ, ∓sin φ)` in the first two coordinates; `clockwise`
    /// picks the sense of traversal.
    pub fn circle(center: &[f64], radius: f64, period: f64, count: usize, clockwise: bool) -> Result<Self> {
        let sign = if clockwise { -1.0 } else { 1.0 };
        let nodes = (0..count)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                let mut x = DVector::from_column_slice(center);
                x[0] += radius * phi.cos();
                x[1] += sign * radius * phi.sin();
                x
            })
            .collect();
        Self::new(nodes, period)
    }

    /// Integrate from `state0` for time `period` and keep `count` equally spaced nodes.
    pub fn sample_orbit(sys: &ChartedSystem, state0: &PhaseState, period: f64, count: usize, tolerance: f64) -> Result<(Self, Orbit)> {
        let orbit = integrate(sys, state0, period, &IntegrateOptions::uniform(tolerance, period, count))?;
        Ok((Self::from_uniform_orbit(sys, &orbit, count)?, orbit))
    }

    /// Nodes from an orbit recorded on a uniform grid of `count` intervals.
    pub fn from_uniform_orbit(sys: &ChartedSystem, orbit: &Orbit, count: usize) -> Result<Self> {
        if orbit.samples.len() != count + 1 {
            return Self::from_orbit(sys, orbit, count);
        }
        if !orbit.is_single_chart() {
            return Err(Error::MultiChart);
        }
        let nodes = orbit.samples[..count].iter().map(|s| s.x_unwrapped.clone()).collect();
        Ok(Self::new(nodes, orbit.period)?.with_winding(sys, orbit.winding.clone())?.with_chart(orbit.samples[0].chart))
    }

    /// Resample any single-chart orbit with its Hermite interpolant.
    pub fn from_orbit(sys: &ChartedSystem, orbit: &Orbit, count: usize) -> Result<Self> {
        if !orbit.is_single_chart() {
            return Err(Error::MultiChart);
        }
        let nodes = (0..count)
            .map(|i| orbit.interpolate(orbit.period * i as f64 / count as f64).map(|(x, _, _)| x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(nodes, orbit.period)?.with_winding(sys, orbit.winding.clone())?.with_chart(orbit.samples[0].chart))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    /// Time step `T/N`.
    pub fn step(&self) -> f64 {
        self.period / self.len() as f64
    }

    pub fn is_contractible(&self) -> bool {
        self.winding.iter().all(|&w| w == 0)
    }

    /// Node `j` of the lift for any integer `j`.
    pub fn node(&self, j: isize) -> Coords {
        let n = self.len() as isize;
        let q = j.div_euclid(n);
        let r = j.rem_euclid(n) as usize;
        if q == 0 {
            self.nodes[r].clone()
        } else {
            &self.nodes[r] + &self.shift * q as f64
        }
    }

    pub fn velocity(&self, i: usize) -> DVector<f64> {
        periodic_derivative(|j| self.node(j), i, &FIRST_DERIVATIVE) / self.step()
    }

    pub fn coordinate_acceleration(&self, i: usize) -> DVector<f64> {
        let h = self.step();
        periodic_derivative(|j| self.node(j), i, &SECOND_DERIVATIVE) / (h * h)
    }

    /// Same nodes with period `T` replaced.
    pub fn with_period(&self, period: f64) -> Self {
        Self { period, ..self.clone() }
    }

    /// Nodes displaced by `eps·V` and period by `eps·τ`.
    pub fn perturbed(&self, v: &[DVector<f64>], tau: f64, eps: f64) -> Self {
        let nodes = self.nodes.iter().zip(v).map(|(x, v)| x + v * eps).collect();
        Self { nodes, period: self.period + eps * tau, ..self.clone() }
    }
}

/// Stencil applied to a periodic sequence given by `value(j)` around index `i`.
pub fn periodic_derivative(value: impl Fn(isize) -> DVector<f64>, i: usize, weights: &[f64; 9]) -> DVector<f64> {
    let mut out = value(i as isize) * weights[4];
    for (m, w) in weights.iter().enumerate() {
        if m != 4 {
            out += value(i as isize + m as isize - 4) * *w;
        }
    }
    out
}

/// First derivative of a periodic vector field sampled on `N` nodes with spacing `h`.
pub fn field_derivative(field: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    let n = field.len() as isize;
    (0..field.len())
        .map(|i| periodic_derivative(|j| field[j.rem_euclid(n) as usize].clone(), i, &FIRST_DERIVATIVE) / h)
        .collect()
}

/// Per-node first-order geometry of a loop: connection, velocity and
/// covariant acceleration.
#[derive(Debug, Clone)]
pub struct LoopKinematics {
    pub connections: Vec<Connection>,
    pub velocity: Vec<DVector<f64>>,
    pub acceleration: Vec<DVector<f64>>,
}

impl LoopKinematics {
    pub fn new(sys: &ChartedSystem, lp: &DiscreteLoop) -> Result<Self> {
        let csys = chart_system(sys, lp.chart)?;
        let mut connections = Vec::with_capacity(lp.len());
        let mut velocity = Vec::with_capacity(lp.len());
        let mut acceleration = Vec::with_capacity(lp.len());
        for i in 0..lp.len() {
            let c = Connection::at(csys, &lp.nodes[i])?;
            let v = lp.velocity(i);
            let a = lp.coordinate_acceleration(i) + c.christoffel_contract(&v, &v);
            connections.push(c);
            velocity.push(v);
            acceleration.push(a);
        }
        Ok(Self { connections, velocity, acceleration })
    }

    /// `∇_γ̇ γ̇ − Ω γ̇` at node `i`.
    pub fn residual(&self, i: usize) -> DVector<f64> {
        &self.acceleration[i] - self.connections[i].lorentz(&self.velocity[i])
    }

    pub fn speed(&self, i: usize) -> f64 {
        self.connections[i].norm(&self.velocity[i])
    }

    fn stalled(&self) -> Vec<bool> {
        let speeds: Vec<f64> = (0..self.velocity.len()).map(|i| self.speed(i)).collect();
        let max = speeds.iter().cloned().fold(0.0, f64::max);
        let floor = (1e-9 * max).max(STALL_SPEED);
        speeds.iter().map(|&s| !(s > floor)).collect()
    }

    /// Fails if some, but not all, nodes have vanishing speed.
    pub fn check_regular(&self) -> Result<()> {
        let stalled = self.stalled();
        if stalled.iter().all(|&s| s) {
            return Ok(());
        }
        match stalled.iter().position(|&s| s) {
            Some(node) => Err(Error::SingularParametrization { node }),
            None => Ok(()),
        }
    }

    /// Fails if any node has vanishing speed.
    pub fn check_nonzero_speed(&self) -> Result<()> {
        match self.stalled().iter().position(|&s| s) {
            Some(node) => Err(Error::SingularParametrization { node }),
            None => Ok(()),
        }
    }
}

/// Second-order geometry at every node, for curvature terms.
pub fn node_geometry(sys: &ChartedSystem, lp: &DiscreteLoop) -> Result<Vec<PointGeometry>> {
    let csys = chart_system(sys, lp.chart)?;
    lp.nodes.iter().map(|x| PointGeometry::at(csys, x)).collect()
}
