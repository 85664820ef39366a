use std::sync::Arc;

use anyhow::{anyhow, Result};
use magcurv_core::geom::sampling::SampleBox;
use magcurv_core::geom::system::FieldResult;
use magcurv_core::nalgebra::{DMatrix, DVector};
use magcurv_core::{builtins, ChartedSystem, Coords, DerivativeScheme};

use crate::config::{Scheme, SystemConfig, TaskConfig};
use crate::expr::Expression;

/// Magnetic strength used when a builtin is given without `b`.
pub fn default_b(builtin: &str) -> f64 {
    match builtin {
        "flat_torus" => 1.0,
        _ => 0.0,
    }
}

fn matrix_field(exprs: Vec<Expression>, n: usize, k: f64, label: &'static str) -> impl Fn(&Coords) -> FieldResult<DMatrix<f64>> {
    move |x| {
        let mut m = DMatrix::zeros(n, n);
        for (i, e) in exprs.iter().enumerate() {
            m[(i / n, i % n)] = e.eval(x.as_slice(), k).map_err(|err| format!("{label}[{i}] = {e}: {err}"))?;
        }
        Ok(m)
    }
}

/// Build the chart system described by `cfg`. `k` binds the energy variable
/// in field expressions.
pub fn build_system(cfg: &SystemConfig, k: Option<f64>) -> Result<ChartedSystem> {
    let scheme = match cfg.derivative {
        Some(Scheme::FiniteDifference) => {
            Some(DerivativeScheme::finite_difference(cfg.fd_step.unwrap_or(DerivativeScheme::DEFAULT_STEP)))
        }
        _ => None,
    };
    if let Some(name) = &cfg.builtin {
        let b = cfg.b.unwrap_or_else(|| default_b(name));
        let sys = builtins::by_name(name, b).ok_or_else(|| anyhow!("unknown builtin {name}"))?;
        return Ok(match scheme {
            Some(s) => sys.with_scheme(s)?,
            None => sys,
        });
    }
    let n = cfg.dim();
    let k = k.unwrap_or(0.0);
    let metric = cfg.metric.clone().ok_or_else(|| anyhow!("system.metric missing"))?;
    let two_form = cfg.two_form.clone().ok_or_else(|| anyhow!("system.two_form missing"))?;
    let mut sys = ChartedSystem::new(
        "expression",
        n,
        Arc::new(matrix_field(metric, n, k, "metric")),
        Arc::new(matrix_field(two_form, n, k, "two_form")),
    )?
    .with_scheme(scheme.unwrap_or_else(|| DerivativeScheme::finite_difference(DerivativeScheme::DEFAULT_STEP)))?
    .with_orientable(cfg.orientable.unwrap_or(true));
    if let Some(p) = cfg.primitive.clone() {
        sys = sys.with_primitive(Arc::new(move |x: &Coords| {
            let vals = p
                .iter()
                .enumerate()
                .map(|(i, e)| e.eval(x.as_slice(), k).map_err(|err| format!("primitive[{i}] = {e}: {err}")))
                .collect::<FieldResult<Vec<f64>>>()?;
            Ok(DVector::from_vec(vals))
        }));
    }
    if let Some(d) = cfg.domain.clone() {
        sys = sys.with_domain(Arc::new(move |x: &Coords| d.eval(x.as_slice(), k).is_ok_and(|v| v > 0.0)));
    }
    if let Some(l) = &cfg.lattice {
        sys = sys.with_lattice(l.iter().map(|&p| (p > 0.0).then_some(p)).collect())?;
    }
    Ok(sys)
}

/// Sampling region from the task, or a default fundamental region for builtins.
pub fn region(system: &SystemConfig, task: &TaskConfig) -> Result<SampleBox> {
    if let (Some(lo), Some(hi)) = (&task.region_lower, &task.region_upper) {
        return Ok(SampleBox::new(lo.clone(), hi.clone())?);
    }
    let tau = 2.0 * std::f64::consts::PI;
    let (lo, hi) = match system.builtin.as_deref() {
        Some("flat_torus") => (vec![0.0, 0.0], vec![tau, tau]),
        Some("round_sphere") => (vec![-1.5, -1.5], vec![1.5, 1.5]),
        Some("round_sphere_polar") => (vec![0.1, 0.0], vec![std::f64::consts::PI - 0.1, tau]),
        Some("hyperbolic_chart") => (vec![-1.0, 0.25], vec![1.0, 4.0]),
        _ => return Err(anyhow!("task.region_lower and task.region_upper are required")),
    };
    Ok(SampleBox::new(lo, hi)?)
}
