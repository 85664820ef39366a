use nalgebra::DVector;

use super::dop853::{Dop853, StepControl};
use super::orbit::{hermite5, Orbit};
use crate::error::{Error, Result};
use crate::geom::{ChartedSystem, Connection};

/// `Ω̃(V) = Ω(V₁) + (ΩV)₁ + ½(ΩV₂)₂`, with `V₁` the g-projection of `V` on
/// `span(v)` and `V₂ = V − V₁`.
pub fn omega_tilde(c: &Connection, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    let vv = c.norm_sq(v);
    if !(vv > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    let proj = |u: &DVector<f64>| v * (c.inner(u, v) / vv);
    let w1 = proj(w);
    let w2 = w - &w1;
    let ow = c.lorentz(w);
    let ow2 = c.lorentz(&w2);
    let ow2_perp = &ow2 - proj(&ow2);
    Ok(c.lorentz(&w1) + proj(&ow) + ow2_perp * 0.5)
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub times: Vec<f64>,
    pub fields: Vec<DVector<f64>>,
    pub end: DVector<f64>,
}

/// Solve `DV/dt = Ω̃(V)` along a single-chart orbit, i.e.
/// `V̇ = −Γ(ẋ, V) + Ω̃(V)` in coordinates, with the base curve taken from the
/// orbit's quintic Hermite interpolant.
pub fn magnetic_transport(sys: &ChartedSystem, orbit: &Orbit, v0: &DVector<f64>, tolerance: f64) -> Result<TransportResult> {
    if !orbit.is_single_chart() {
        return Err(Error::MultiChart);
    }
    let n = sys.dimension();
    if v0.len() != n {
        return Err(Error::Dimension { expected: n, got: v0.len() });
    }
    let chart_sys = if orbit.samples[0].chart == 0 {
        sys
    } else {
        sys.transition().map(|t| t.alternate.as_ref()).ok_or(Error::MultiChart)?
    };
    let samples = &orbit.samples;
    let mut times = vec![samples[0].t];
    let mut fields = vec![v0.clone()];
    let mut state = v0.as_slice().to_vec();
    for seg in samples.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let (x, xdot) = hermite5(a, b, t);
            let c = Connection::at(chart_sys, &x)?;
            let w = DVector::from_column_slice(y);
            let out = omega_tilde(&c, &xdot, &w)? - c.christoffel_contract(&xdot, &w);
            dy.copy_from_slice(out.as_slice());
            Ok(())
        };
        let mut stepper = Dop853::new(rhs, a.t, state, StepControl::with_tolerance(tolerance))?;
        while stepper.t < b.t {
            stepper.step(b.t)?;
        }
        state = stepper.y;
        times.push(b.t);
        fields.push(DVector::from_column_slice(&state));
    }
    let end = fields.last().unwrap().clone();
    Ok(TransportResult { times, fields, end })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::orbit::{integrate, IntegrateOptions, PhaseState};
    use crate::geom::builtins;
    use std::f64::consts::PI;

    #[test]
    fn omega_tilde_properties() {
        let sys = builtins::modulated_torus(1.0, 0.2);
        let c = Connection::at(&sys, &DVector::from_vec(vec![0.3, 0.2])).unwrap();
        let v = DVector::from_vec(vec![0.6, -0.8]);
        assert!((omega_tilde(&c, &v, &v).unwrap() - c.lorentz(&v)).amax() < 1e-15);
        let a = DVector::from_vec(vec![0.3, 1.1]);
        let b = DVector::from_vec(vec![-2.0, 0.4]);
        let s = c.inner(&omega_tilde(&c, &v, &a).unwrap(), &b) + c.inner(&a, &omega_tilde(&c, &v, &b).unwrap());
        assert!(s.abs() < 1e-14);
        assert!(matches!(omega_tilde(&c, &DVector::zeros(2), &a), Err(Error::ZeroVelocity)));
    }

    #[test]
    fn velocity_is_transported_to_itself() {
        let sys = builtins::flat_torus(1.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let orbit = integrate(&sys, &s0, 2.0 * PI, &IntegrateOptions::new(1e-12)).unwrap();
        let r = magnetic_transport(&sys, &orbit, &s0.v, 1e-12).unwrap();
        for (f, s) in r.fields.iter().zip(&orbit.samples) {
            assert!((f - &s.v).amax() < 1e-9);
        }
    }

    #[test]
    fn flat_field_free_transport_is_constant() {
        let sys = builtins::flat_torus(0.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.3]);
        let orbit = integrate(&sys, &s0, 3.0, &IntegrateOptions::new(1e-10)).unwrap();
        let w = DVector::from_vec(vec![0.2, -1.0]);
        let r = magnetic_transport(&sys, &orbit, &w, 1e-10).unwrap();
        assert!((r.end - w).amax() < 1e-13);
    }
}
