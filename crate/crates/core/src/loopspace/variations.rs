use nalgebra::DVector;

use super::action::Variation;
use super::discrete::{chart_system, DiscreteLoop, LoopKinematics};
use super::hessian::HessianContext;
use crate::error::{Error, Result};
use crate::flow::omega_tilde;
use crate::geom::frames::{gram_schmidt, orthonormal_frame};
use crate::geom::{ChartedSystem, Connection};
use crate::magcurv::sec_omega_k;

/// Largest allowed mismatch `|E(T) − E(0)|` of a transported frame.
pub const FRAME_CLOSURE_TOL: f64 = 1e-6;

const TRANSPORT_SUBSTEPS: usize = 4;

/// Frame fields along a loop with their covariant derivatives, indexed `[node][vector]`.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub fields: Vec<Vec<DVector<f64>>>,
    pub derivatives: Vec<Vec<DVector<f64>>>,
    pub closure_error: f64,
}

impl FrameField {
    pub fn len(&self) -> usize {
        self.fields.first().map_or(0, |f| f.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vector `b` of the frame at every node.
    pub fn column(&self, b: usize) -> Vec<DVector<f64>> {
        self.fields.iter().map(|f| f[b].clone()).collect()
    }

    pub fn column_derivative(&self, b: usize) -> Vec<DVector<f64>> {
        self.derivatives.iter().map(|f| f[b].clone()).collect()
    }
}

/// Coordinate vectors `∂_b` with `D∂_b/dt = Γ(γ̇, ∂_b)`.
pub fn coordinate_frame(kin: &LoopKinematics) -> FrameField {
    let n = kin.velocity[0].len();
    let mut fields = Vec::with_capacity(kin.velocity.len());
    let mut derivatives = Vec::with_capacity(kin.velocity.len());
    for (c, v) in kin.connections.iter().zip(&kin.velocity) {
        let e: Vec<DVector<f64>> = (0..n)
            .map(|b| {
                let mut e = DVector::zeros(n);
                e[b] = 1.0;
                e
            })
            .collect();
        derivatives.push(e.iter().map(|e| c.christoffel_contract(v, e)).collect());
        fields.push(e);
    }
    FrameField { fields, derivatives, closure_error: 0.0 }
}

/// Lagrange weights for offsets −3..=4 at fractional position `theta`.
fn lagrange_weights(theta: f64) -> [f64; 8] {
    let mut w = [1.0; 8];
    for (m, wm) in w.iter_mut().enumerate() {
        let om = m as f64 - 3.0;
        for l in 0..8 {
            if l != m {
                let ol = l as f64 - 3.0;
                *wm *= (theta - ol) / (om - ol);
            }
        }
    }
    w
}

/// Magnetically transported orthonormal frame, started from `γ̇/|γ̇|` completed
/// to an orthonormal basis at node 0 and integrated with RK4 on the node grid.
///
/// The frame must close up to [`FRAME_CLOSURE_TOL`]; the small mismatch is then
/// spread linearly and each node re-orthonormalized.
pub fn transported_frame(sys: &ChartedSystem, lp: &DiscreteLoop) -> Result<FrameField> {
    let csys = chart_system(sys, lp.chart)?;
    let kin = LoopKinematics::new(sys, lp)?;
    kin.check_nonzero_speed()?;
    let n = lp.dim();
    let count = lp.len() as isize;
    let h = lp.step();

    let e0 = orthonormal_frame(&kin.connections[0], &kin.velocity[0])?;

    let velocity_at = |j: isize| kin.velocity[j.rem_euclid(count) as usize].clone();
    let base = |i: usize, theta: f64| -> (DVector<f64>, DVector<f64>) {
        let w = lagrange_weights(theta);
        let mut x = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for (m, wm) in w.iter().enumerate() {
            let j = i as isize + m as isize - 3;
            x += lp.node(j) * *wm;
            v += velocity_at(j) * *wm;
        }
        (x, v)
    };
    let rhs = |x: &DVector<f64>, v: &DVector<f64>, e: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
        let c = Connection::at(csys, x)?;
        e.iter().map(|e| Ok(omega_tilde(&c, v, e)? - c.christoffel_contract(v, e))).collect()
    };
    let axpy = |e: &[DVector<f64>], k: &[DVector<f64>], s: f64| -> Vec<DVector<f64>> {
        e.iter().zip(k).map(|(e, k)| e + k * s).collect()
    };

    let dt = h / TRANSPORT_SUBSTEPS as f64;
    let mut fields = vec![e0.clone()];
    let mut e = e0.clone();
    for i in 0..lp.len() {
        for s in 0..TRANSPORT_SUBSTEPS {
            let th = s as f64 / TRANSPORT_SUBSTEPS as f64;
            let dth = 1.0 / TRANSPORT_SUBSTEPS as f64;
            let (x0, v0) = base(i, th);
            let (xm, vm) = base(i, th + 0.5 * dth);
            let (x1, v1) = base(i, th + dth);
            let k1 = rhs(&x0, &v0, &e)?;
            let k2 = rhs(&xm, &vm, &axpy(&e, &k1, 0.5 * dt))?;
            let k3 = rhs(&xm, &vm, &axpy(&e, &k2, 0.5 * dt))?;
            let k4 = rhs(&x1, &v1, &axpy(&e, &k3, dt))?;
            for b in 0..n {
                e[b] += (&k1[b] + &k2[b] * 2.0 + &k3[b] * 2.0 + &k4[b]) * (dt / 6.0);
            }
        }
        fields.push(e.clone());
    }

    let end = fields.pop().unwrap();
    let mismatch: Vec<DVector<f64>> = end.iter().zip(&e0).map(|(a, b)| a - b).collect();
    let closure_error = mismatch.iter().map(|d| d.amax()).fold(0.0, f64::max);
    if closure_error > FRAME_CLOSURE_TOL {
        return Err(Error::FrameViolation(format!(
            "transported frame does not close: mismatch {closure_error:.3e} exceeds {FRAME_CLOSURE_TOL:e}"
        )));
    }
    let total = lp.len() as f64;
    let mut derivatives = Vec::with_capacity(lp.len());
    for (i, frame) in fields.iter_mut().enumerate() {
        let c = &kin.connections[i];
        let corrected: Vec<DVector<f64>> =
            frame.iter().zip(&mismatch).map(|(f, d)| f - d * (i as f64 / total)).collect();
        *frame = gram_schmidt(c, &corrected)?;
        derivatives.push(frame.iter().map(|f| omega_tilde(c, &kin.velocity[i], f)).collect::<Result<Vec<_>>>()?);
    }
    Ok(FrameField { fields, derivatives, closure_error })
}

/// Add a multiple of `γ̇` so that the last square of the Hessian vanishes:
/// `W = V + gγ̇` with `τ = ∫⟨V̇,γ̇⟩/|γ̇|²` and `ġ = τ/T − ⟨V̇,γ̇⟩/|γ̇|²`.
///
/// `g` is the cumulative trapezoid, so `g(T) = 0` holds to rounding. The
/// returned variation carries its exact covariant derivative.
pub fn make_test_variation(sys: &ChartedSystem, lp: &DiscreteLoop, v: &Variation) -> Result<Variation> {
    v.check(lp)?;
    let kin = LoopKinematics::new(sys, lp)?;
    kin.check_nonzero_speed()?;
    make_test_variation_with(&kin, lp, v)
}

pub(crate) fn make_test_variation_with(kin: &LoopKinematics, lp: &DiscreteLoop, v: &Variation) -> Result<Variation> {
    let scale = v.v.iter().zip(&kin.connections).map(|(w, c)| c.norm(w)).fold(0.0, f64::max);
    for i in 0..lp.len() {
        let c = &kin.connections[i];
        let gd = &kin.velocity[i];
        if c.inner(&v.v[i], gd).abs() > 1e-8 * (scale * c.norm(gd)).max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!("variation field is not normal to the loop at node {i}")));
        }
    }
    let d = v.covariant_derivative(lp, kin);
    let h = lp.step();
    let q: Vec<f64> = (0..lp.len())
        .map(|i| kin.connections[i].inner(&d[i], &kin.velocity[i]) / kin.connections[i].norm_sq(&kin.velocity[i]))
        .collect();
    let tau = h * q.iter().sum::<f64>();
    let p: Vec<f64> = q.iter().map(|q| q - tau / lp.period).collect();
    let mut g = vec![0.0; lp.len()];
    for i in 1..lp.len() {
        g[i] = g[i - 1] - 0.5 * h * (p[i - 1] + p[i]);
    }
    let mut w = Vec::with_capacity(lp.len());
    let mut dw = Vec::with_capacity(lp.len());
    for i in 0..lp.len() {
        let gd = &kin.velocity[i];
        w.push(&v.v[i] + gd * g[i]);
        dw.push(&d[i] - gd * p[i] + &kin.acceleration[i] * g[i]);
    }
    Ok(Variation::new(w, tau).with_derivative(dw))
}

/// A windowed sine test variation and its Hessian value.
#[derive(Debug, Clone)]
pub struct SineMode {
    pub variation: Variation,
    /// `Q(W, τ)` from the curvature expression.
    pub q: f64,
    /// `∫(ḟ² − f² Sec^Ω_k(γ̇/|γ̇|, V))` by the same quadrature.
    pub expected: f64,
}

/// Profile `f = sin((m+1)π(t − t_j)/T)` on the half-open window
/// `[jT/(m+1), (j+1)T/(m+1))`, zero elsewhere, with its right derivative.
pub fn sine_profile(t: f64, period: f64, j: usize, m: usize) -> (f64, f64) {
    let windows = (m + 1) as f64;
    let s = t * windows / period - j as f64;
    if !(0.0..1.0).contains(&s) {
        return (0.0, 0.0);
    }
    let omega = std::f64::consts::PI * windows / period;
    let phase = std::f64::consts::PI * s;
    (phase.sin(), omega * phase.cos())
}

/// `V^f = f V` for a unit normal transported field `V`, passed through
/// [`make_test_variation`].
pub fn sine_mode_variation(
    sys: &ChartedSystem,
    lp: &DiscreteLoop,
    k: f64,
    field: &[DVector<f64>],
    j: usize,
    m: usize,
) -> Result<SineMode> {
    if j > m {
        return Err(Error::InvalidInput(format!("window {j} out of range for {} windows", m + 1)));
    }
    if field.len() != lp.len() {
        return Err(Error::Dimension { expected: lp.len(), got: field.len() });
    }
    let ctx = HessianContext::new(sys, lp, k)?;
    let kin = &ctx.kinematics;
    let h = lp.step();
    let mut v = Vec::with_capacity(lp.len());
    let mut d = Vec::with_capacity(lp.len());
    let mut expected = 0.0;
    for i in 0..lp.len() {
        let c = &kin.connections[i];
        let gd = &kin.velocity[i];
        let (f, df) = sine_profile(i as f64 * h, lp.period, j, m);
        let dv = omega_tilde(c, gd, &field[i])?;
        v.push(&field[i] * f);
        d.push(&field[i] * df + dv * f);
        if f != 0.0 || df != 0.0 {
            let speed = c.norm(gd);
            let u = gd / speed;
            let normal = &field[i] - &u * c.inner(&field[i], &u);
            let normal = &normal / c.norm(&normal);
            let sec = sec_omega_k(&ctx.geometry[i], &u, &normal, 0.5 * speed * speed)?;
            expected += df * df - f * f * sec;
        }
    }
    let variation = make_test_variation_with(kin, lp, &Variation::new(v, 0.0).with_derivative(d))?;
    let q = ctx.curvature_form(lp, &variation)?;
    Ok(SineMode { variation, q, expected: h * expected })
}
