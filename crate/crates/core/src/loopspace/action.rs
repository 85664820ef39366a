use nalgebra::DVector;

use super::discrete::{chart_system, field_derivative, DiscreteLoop, LoopKinematics};
use crate::error::{Error, Result};
use crate::geom::ChartedSystem;

/// Tangent vector `(V, τ)` to the free-period loop space at a discrete loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Variation {
    pub v: Vec<DVector<f64>>,
    pub tau: f64,
    /// Covariant derivative `DV/dt` at the nodes, when known exactly.
    /// Otherwise it is taken from periodic stencils.
    pub derivative: Option<Vec<DVector<f64>>>,
}

impl Variation {
    pub fn new(v: Vec<DVector<f64>>, tau: f64) -> Self {
        Self { v, tau, derivative: None }
    }

    pub fn with_derivative(mut self, derivative: Vec<DVector<f64>>) -> Self {
        self.derivative = Some(derivative);
        self
    }

    pub fn zero(lp: &DiscreteLoop) -> Self {
        Self::new(vec![DVector::zeros(lp.dim()); lp.len()], 0.0)
    }

    pub fn period_only(lp: &DiscreteLoop, tau: f64) -> Self {
        Self { tau, ..Self::zero(lp) }
    }

    pub fn check(&self, lp: &DiscreteLoop) -> Result<()> {
        if self.v.len() != lp.len() {
            return Err(Error::Dimension { expected: lp.len(), got: self.v.len() });
        }
        if let Some(d) = &self.derivative {
            if d.len() != lp.len() {
                return Err(Error::Dimension { expected: lp.len(), got: d.len() });
            }
        }
        let all = self.v.iter().chain(self.derivative.iter().flatten());
        for w in all {
            if w.len() != lp.dim() {
                return Err(Error::Dimension { expected: lp.dim(), got: w.len() });
            }
            if w.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite variation entry".into()));
            }
        }
        if !self.tau.is_finite() {
            return Err(Error::InvalidInput("non-finite period variation".into()));
        }
        Ok(())
    }

    /// `DV/dt` at the nodes.
    pub fn covariant_derivative(&self, lp: &DiscreteLoop, kin: &LoopKinematics) -> Vec<DVector<f64>> {
        match &self.derivative {
            Some(d) => d.clone(),
            None => field_derivative(&self.v, lp.step())
                .into_iter()
                .enumerate()
                .map(|(i, dv)| dv + kin.connections[i].christoffel_contract(&kin.velocity[i], &self.v[i]))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            v: self.v.iter().map(|w| w * s).collect(),
            tau: self.tau * s,
            derivative: self.derivative.as_ref().map(|d| d.iter().map(|w| w * s).collect()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        Self { v: self.v.iter().zip(&other.v).map(|(a, b)| a + b).collect(), tau: self.tau + other.tau, derivative }
    }
}

fn check_primitive_periodic(sys: &ChartedSystem, lp: &DiscreteLoop) -> Result<()> {
    if lp.is_contractible() {
        return Ok(());
    }
    let x0 = &lp.nodes[0];
    let a = sys.primitive_at(x0)?.ok_or(Error::NoPrimitive)?;
    let b = sys.primitive_at(&(x0 + &lp.shift))?.ok_or(Error::NoPrimitive)?;
    if (a - b).amax() > 1e-12 {
        return Err(Error::NoPrimitive);
    }
    Ok(())
}

/// Kinetic and magnetic parts of the action, `S_k = kinetic + kT + magnetic`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionTerms {
    /// `∫ ½|γ̇|² dt`; scales like `1/T` at fixed nodes.
    pub kinetic: f64,
    /// `∫ θ(γ̇) dt`; independent of `T` at fixed nodes.
    pub magnetic: f64,
}

impl ActionTerms {
    pub fn action(&self, k: f64, period: f64) -> f64 {
        self.kinetic + k * period + self.magnetic
    }

    /// Period minimizing the action at fixed nodes, `√(T·kinetic / k)`.
    pub fn best_period(&self, k: f64, period: f64) -> f64 {
        (self.kinetic * period / k).sqrt()
    }

    /// Action at [`Self::best_period`]: `2√(k·T·kinetic) + magnetic`.
    pub fn reduced_action(&self, k: f64, period: f64) -> f64 {
        2.0 * (k * self.kinetic * period).sqrt() + self.magnetic
    }
}

/// Needs a primitive θ of σ on the chart (or on the cover chart for lattice
/// systems). For loops with nonzero winding the primitive must be
/// lattice-periodic, otherwise the action is undefined.
pub fn action_terms(sys: &ChartedSystem, lp: &DiscreteLoop) -> Result<ActionTerms> {
    let csys = chart_system(sys, lp.chart)?;
    if !csys.has_primitive() {
        return Err(Error::NoPrimitive);
    }
    check_primitive_periodic(csys, lp)?;
    let h = lp.step();
    let (mut kinetic, mut magnetic) = (0.0, 0.0);
    for i in 0..lp.len() {
        let x = &lp.nodes[i];
        let v = lp.velocity(i);
        let g = csys.metric_at(x)?;
        let theta = csys.primitive_at(x)?.ok_or(Error::NoPrimitive)?;
        kinetic += 0.5 * v.dot(&(g * &v));
        magnetic += theta.dot(&v);
    }
    Ok(ActionTerms { kinetic: h * kinetic, magnetic: h * magnetic })
}

/// Free-period action `S_k = ∫₀ᵀ (½|γ̇|² + k) dt + ∫ θ(γ̇) dt` on the lifted loop.
pub fn action(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64) -> Result<f64> {
    Ok(action_terms(sys, lp)?.action(k, lp.period))
}

/// `η_k(γ)(V, τ) = −∫⟨∇_γ̇γ̇ − Ωγ̇, V⟩ dt + (τ/T)∫(k − ½|γ̇|²) dt`.
pub fn eta_k(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, var: &Variation) -> Result<f64> {
    var.check(lp)?;
    let kin = LoopKinematics::new(sys, lp)?;
    kin.check_regular()?;
    Ok(eta_with(&kin, lp, k, var))
}

pub(crate) fn eta_with(kin: &LoopKinematics, lp: &DiscreteLoop, k: f64, var: &Variation) -> f64 {
    let h = lp.step();
    let mut spatial = 0.0;
    let mut temporal = 0.0;
    for i in 0..lp.len() {
        let c = &kin.connections[i];
        spatial -= c.inner(&kin.residual(i), &var.v[i]);
        temporal += k - 0.5 * c.norm_sq(&kin.velocity[i]);
    }
    h * spatial + var.tau / lp.period * h * temporal
}

/// Components of the dual-norm estimate of `η_k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EtaResidual {
    /// `√(T ∫|∇_γ̇γ̇ − Ωγ̇|² dt)`.
    pub spatial: f64,
    /// `|mean(k − ½|γ̇|²)|`.
    pub temporal: f64,
    pub norm: f64,
    pub gate: f64,
}

impl EtaResidual {
    pub fn passes(&self) -> bool {
        self.norm < self.gate
    }
}

/// Scale-aware gate for calling a loop critical.
pub fn critical_gate(period: f64) -> f64 {
    1e-5 * (1.0 + period)
}

pub fn eta_residual(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64) -> Result<EtaResidual> {
    let kin = LoopKinematics::new(sys, lp)?;
    kin.check_regular()?;
    Ok(eta_residual_with(&kin, lp, k))
}

pub(crate) fn eta_residual_with(kin: &LoopKinematics, lp: &DiscreteLoop, k: f64) -> EtaResidual {
    let h = lp.step();
    let n = lp.len();
    let mut r2 = 0.0;
    let mut mean = 0.0;
    for i in 0..n {
        let c = &kin.connections[i];
        r2 += c.norm_sq(&kin.residual(i));
        mean += k - 0.5 * c.norm_sq(&kin.velocity[i]);
    }
    let spatial = (lp.period * h * r2).sqrt();
    let temporal = (mean / n as f64).abs();
    let norm = spatial.hypot(temporal);
    EtaResidual { spatial, temporal, norm, gate: critical_gate(lp.period) }
}

/// Fail with "not at a critical loop" unless the residual passes its gate.
pub fn require_critical(kin: &LoopKinematics, lp: &DiscreteLoop, k: f64) -> Result<EtaResidual> {
    let r = eta_residual_with(kin, lp, k);
    if !r.passes() {
        return Err(Error::NotCritical { residual: r.norm, gate: r.gate });
    }
    Ok(r)
}
