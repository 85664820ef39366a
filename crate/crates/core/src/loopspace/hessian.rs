use nalgebra::{DMatrix, DVector};

use super::action::{require_critical, EtaResidual, Variation};
use super::discrete::{node_geometry, DiscreteLoop, LoopKinematics};
use crate::error::Result;
use crate::geom::{ChartedSystem, PointGeometry};
use crate::magcurv::{m_omega_k, sec_omega_k};

/// Everything needed to evaluate the Hessian of the action at a critical loop.
///
/// Per node the second-variation integrand is a quadratic form in
/// `z = (V, DV/dt, τ)`, stored as a symmetric `(2n+1)²` matrix.
#[derive(Debug, Clone)]
pub struct HessianContext {
    pub kinematics: LoopKinematics,
    pub geometry: Vec<PointGeometry>,
    pub node_forms: Vec<DMatrix<f64>>,
    pub residual: EtaResidual,
    pub k: f64,
}

impl HessianContext {
    pub fn new(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64) -> Result<Self> {
        let kinematics = LoopKinematics::new(sys, lp)?;
        kinematics.check_nonzero_speed()?;
        let residual = require_critical(&kinematics, lp, k)?;
        let geometry = node_geometry(sys, lp)?;
        let node_forms = (0..lp.len()).map(|i| second_variation_matrix(&kinematics, &geometry[i], i, lp.period)).collect();
        Ok(Self { kinematics, geometry, node_forms, residual, k })
    }

    /// `Σ_i h zᵢᵀ Mᵢ zᵢ` for the nodal data of `var`.
    pub fn form(&self, lp: &DiscreteLoop, var: &Variation) -> Result<f64> {
        var.check(lp)?;
        let d = var.covariant_derivative(lp, &self.kinematics);
        let h = lp.step();
        let mut q = 0.0;
        for i in 0..lp.len() {
            let z = stack(&var.v[i], &d[i], var.tau);
            q += z.dot(&(&self.node_forms[i] * &z));
        }
        Ok(h * q)
    }

    /// Hessian written with the magnetic curvature operator.
    pub fn curvature_form(&self, lp: &DiscreteLoop, var: &Variation) -> Result<f64> {
        var.check(lp)?;
        let d = var.covariant_derivative(lp, &self.kinematics);
        let scale = var.v.iter().map(|w| w.amax()).fold(0.0, f64::max);
        let eps = 1e-10 * (1.0 + scale);
        let h = lp.step();
        let t = lp.period;
        let mut q = 0.0;
        for i in 0..lp.len() {
            let p = &self.geometry[i];
            let gd = &self.kinematics.velocity[i];
            let speed = p.norm(gd);
            let u = gd / speed;
            let k_i = 0.5 * speed * speed;
            let proj = |w: &DVector<f64>| &u * p.inner(w, &u);
            let v = &var.v[i];
            let v1 = proj(v);
            let v2 = v - &v1;
            let perp = |w: DVector<f64>| {
                let par = proj(&w);
                w - par
            };
            let first = perp(&d[i] - (p.lorentz(&v1) + p.lorentz(v)) * 0.5);
            let norm_v2 = p.norm(&v2);
            let curvature = if norm_v2 >= eps {
                // second projection: normalizing amplifies rounding in ⟨V₂, u⟩
                let w = perp(&v2 / norm_v2);
                let w = &w / p.norm(&w);
                norm_v2 * norm_v2 * sec_omega_k(p, &u, &w, k_i)?
            } else {
                p.inner(&m_omega_k(p, &u, &v2, k_i)?, &v2)
            };
            let last = p.inner(&d[i], gd) / speed - var.tau / t * speed;
            q += p.norm_sq(&first) - curvature + last * last;
        }
        Ok(h * q)
    }
}

fn stack(v: &DVector<f64>, d: &DVector<f64>, tau: f64) -> DVector<f64> {
    let n = v.len();
    let mut z = DVector::zeros(2 * n + 1);
    z.rows_mut(0, n).copy_from(v);
    z.rows_mut(n, n).copy_from(d);
    z[2 * n] = tau;
    z
}

/// Node matrix of
/// `⟨D − ΩV, D⟩ − ⟨R(V,γ̇)γ̇ − (∇_VΩ)γ̇, V⟩ − ⟨D,γ̇⟩²/|γ̇|² + (⟨D,γ̇⟩/|γ̇| − τ|γ̇|/T)²`.
fn second_variation_matrix(kin: &LoopKinematics, p: &PointGeometry, i: usize, period: f64) -> DMatrix<f64> {
    let n = p.dim();
    let gd = &kin.velocity[i];
    let g = &p.g;
    let speed = p.norm(gd);
    let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);

    m.view_mut((n, n), (n, n)).copy_from(g);
    let g_omega = g * &p.omega;
    let cross = &g_omega * -0.5;
    m.view_mut((n, 0), (n, n)).copy_from(&cross);
    m.view_mut((0, n), (n, n)).copy_from(&cross.transpose());

    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let col = p.riemann(&e, gd, gd) - p.nabla_omega(&e, gd);
        jac.set_column(j, &col);
    }
    let gj = g * jac;
    let vv = (&gj + gj.transpose()) * -0.5;
    m.view_mut((0, 0), (n, n)).copy_from(&vv);

    let lowered = g * gd;
    let dd = &lowered * lowered.transpose() / (speed * speed);
    let mut block = m.view_mut((n, n), (n, n));
    block -= &dd;

    let mut u = DVector::zeros(2 * n + 1);
    u.rows_mut(n, n).copy_from(&(&lowered / speed));
    u[2 * n] = -speed / period;
    m += &u * u.transpose();
    m
}

/// Lemma-form Hessian `Q_γ(η_k)(V, τ)`; fails away from critical loops.
pub fn hessian_form(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, var: &Variation) -> Result<f64> {
    HessianContext::new(sys, lp, k)?.form(lp, var)
}

/// Hessian in terms of `Sec^Ω_k`; equal to [`hessian_form`] up to discretization.
pub fn hessian_form_curvature(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, var: &Variation) -> Result<f64> {
    HessianContext::new(sys, lp, k)?.curvature_form(lp, var)
}
