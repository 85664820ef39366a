//! Built-in magnetic systems with analytic derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::system::{AnalyticDerivatives, ChartTransition, ChartedSystem, Coords, CovectorField, DerivativeScheme};

/// Scalar field with its coordinate gradient, used for magnetic strengths.
pub type ScalarField = Arc<dyn Fn(&Coords) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(&Coords) -> DVector<f64> + Send + Sync>;

fn area_form(scale: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, scale, -scale, 0.0])
}

fn zeros_list(n: usize, len: usize) -> Vec<DMatrix<f64>> {
    vec![DMatrix::zeros(n, n); len]
}

/// Flat torus `R²/(2πZ)²` with magnetic strength `b(x)`, so `σ = b dx¹∧dx²`.
pub fn flat_torus_with_field(
    name: &str,
    b: ScalarField,
    grad_b: GradientField,
    primitive: Option<CovectorField>,
) -> ChartedSystem {
    let b_sigma = b.clone();
    let derivs = AnalyticDerivatives {
        metric_gradient: Arc::new(|_| Ok(zeros_list(2, 2))),
        metric_hessian: Arc::new(|_| Ok(zeros_list(2, 4))),
        two_form_gradient: Arc::new(move |x| {
            let db = grad_b(x);
            Ok(vec![area_form(db[0]), area_form(db[1])])
        }),
    };
    let mut sys = ChartedSystem::new(
        name,
        2,
        Arc::new(|_| Ok(DMatrix::identity(2, 2))),
        Arc::new(move |x| Ok(area_form(b_sigma(x)))),
    )
    .expect("dimension 2")
    .with_lattice(vec![Some(2.0 * PI), Some(2.0 * PI)])
    .expect("positive periods")
    .with_scheme(DerivativeScheme::Analytic(derivs))
    .expect("analytic scheme");
    if let Some(p) = primitive {
        sys = sys.with_primitive(p);
    }
    sys
}

/// Flat torus with constant magnetic strength `b` and cover primitive
/// `θ = b x¹ dx²`.
pub fn flat_torus(b: f64) -> ChartedSystem {
    flat_torus_with_field(
        "flat_torus",
        Arc::new(move |_| b),
        Arc::new(|_| DVector::zeros(2)),
        Some(Arc::new(move |x: &Coords| Ok(DVector::from_vec(vec![0.0, b * x[0]])))),
    )
}

/// Flat torus with `b = b0 + a sin x¹` and primitive `θ = (b0 x¹ − a cos x¹) dx²`.
pub fn modulated_torus(b0: f64, a: f64) -> ChartedSystem {
    flat_torus_with_field(
        "modulated_torus",
        Arc::new(move |x| b0 + a * x[0].sin()),
        Arc::new(move |x| DVector::from_vec(vec![a * x[0].cos(), 0.0])),
        Some(Arc::new(move |x: &Coords| {
            Ok(DVector::from_vec(vec![0.0, b0 * x[0] - a * x[0].cos()]))
        })),
    )
}

/// Conformal factor `φ(s) = 4/(1+s)²` of the stereographic metric, `s = |x|²`,
/// with its first two derivatives in `s`.
fn stereo_factor(s: f64) -> (f64, f64, f64) {
    let q = 1.0 + s;
    (4.0 / (q * q), -8.0 / (q * q * q), 24.0 / (q * q * q * q))
}

fn stereographic_chart(name: &str, b: f64, sign: f64) -> ChartedSystem {
    let sb = sign * b;
    let grad_phi = |x: &Coords| {
        let (_, d1, _) = stereo_factor(x.norm_squared());
        [2.0 * d1 * x[0], 2.0 * d1 * x[1]]
    };
    let derivs = AnalyticDerivatives {
        metric_gradient: Arc::new(move |x| {
            let gp = grad_phi(x);
            Ok(vec![DMatrix::identity(2, 2) * gp[0], DMatrix::identity(2, 2) * gp[1]])
        }),
        metric_hessian: Arc::new(move |x| {
            let (_, d1, d2) = stereo_factor(x.norm_squared());
            let mut out = Vec::with_capacity(4);
            for i in 0..2 {
                for j in 0..2 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let h = 4.0 * d2 * x[i] * x[j] + 2.0 * d1 * delta;
                    out.push(DMatrix::identity(2, 2) * h);
                }
            }
            Ok(out)
        }),
        two_form_gradient: Arc::new(move |x| {
            let gp = grad_phi(x);
            Ok(vec![area_form(sb * gp[0]), area_form(sb * gp[1])])
        }),
    };
    ChartedSystem::new(
        name,
        2,
        Arc::new(|x| Ok(DMatrix::identity(2, 2) * stereo_factor(x.norm_squared()).0)),
        Arc::new(move |x| Ok(area_form(sb * stereo_factor(x.norm_squared()).0))),
    )
    .expect("dimension 2")
    .with_scheme(DerivativeScheme::Analytic(derivs))
    .expect("analytic scheme")
    .with_primitive(Arc::new(move |x: &Coords| {
        let h = sb * 2.0 / (1.0 + x.norm_squared());
        Ok(DVector::from_vec(vec![-h * x[1], h * x[0]]))
    }))
}

/// Inversion `x ↦ x/|x|²` with its differential; an involution.
pub fn inversion(x: &Coords, v: &DVector<f64>) -> (Coords, DVector<f64>) {
    let r2 = x.norm_squared();
    let y = x / r2;
    let w = (v * r2 - x * (2.0 * x.dot(v))) / (r2 * r2);
    (y, w)
}

/// Unit round sphere in stereographic coordinates with `σ = b·μ_g`.
///
/// Two charts related by inversion. The second chart has reversed
/// orientation, so the two-form changes sign there. The chart-local primitive
/// `θ = 2b/(1+|x|²)(−x² dx¹ + x¹ dx²)` is valid for loops inside one chart.
pub fn round_sphere(b: f64) -> ChartedSystem {
    let alternate = stereographic_chart("round_sphere_south", b, -1.0);
    stereographic_chart("round_sphere", b, 1.0).with_transition(ChartTransition {
        safe_radius: 2.0,
        map: Arc::new(inversion),
        alternate: Arc::new(alternate),
    })
}

/// Unit sphere in polar coordinates `g = diag(1, sin²x¹)`, `σ = 0`, valid for
/// `0 < x¹ < π`.
pub fn round_sphere_polar() -> ChartedSystem {
    let derivs = AnalyticDerivatives {
        metric_gradient: Arc::new(|x| {
            let mut d = DMatrix::zeros(2, 2);
            d[(1, 1)] = (2.0 * x[0]).sin();
            Ok(vec![d, DMatrix::zeros(2, 2)])
        }),
        metric_hessian: Arc::new(|x| {
            let mut d = DMatrix::zeros(2, 2);
            d[(1, 1)] = 2.0 * (2.0 * x[0]).cos();
            Ok(vec![d, DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)])
        }),
        two_form_gradient: Arc::new(|_| Ok(zeros_list(2, 2))),
    };
    ChartedSystem::new(
        "round_sphere_polar",
        2,
        Arc::new(|x| Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0].sin().powi(2)])))),
        Arc::new(|_| Ok(DMatrix::zeros(2, 2))),
    )
    .expect("dimension 2")
    .with_scheme(DerivativeScheme::Analytic(derivs))
    .expect("analytic scheme")
    .with_lattice(vec![None, Some(2.0 * PI)])
    .expect("positive period")
    .with_domain(Arc::new(|x| x[0] > 0.0 && x[0] < PI))
    .with_primitive(Arc::new(|_| Ok(DVector::zeros(2))))
}

/// Upper half-plane `g = (dx² + dy²)/y²` with `σ` the hyperbolic area form and
/// bounded primitive `θ = dx/y`.
pub fn hyperbolic_chart() -> ChartedSystem {
    let derivs = AnalyticDerivatives {
        metric_gradient: Arc::new(|x| {
            let y = x[1];
            Ok(vec![DMatrix::zeros(2, 2), DMatrix::identity(2, 2) * (-2.0 / (y * y * y))])
        }),
        metric_hessian: Arc::new(|x| {
            let y = x[1];
            let z = DMatrix::zeros(2, 2);
            Ok(vec![z.clone(), z.clone(), z, DMatrix::identity(2, 2) * (6.0 / (y * y * y * y))])
        }),
        two_form_gradient: Arc::new(|x| {
            let y = x[1];
            Ok(vec![DMatrix::zeros(2, 2), area_form(-2.0 / (y * y * y))])
        }),
    };
    ChartedSystem::new(
        "hyperbolic_chart",
        2,
        Arc::new(|x| {
            if x[1] <= 0.0 {
                return Err("upper half-plane requires x2 > 0".into());
            }
            Ok(DMatrix::identity(2, 2) / (x[1] * x[1]))
        }),
        Arc::new(|x| Ok(area_form(1.0 / (x[1] * x[1])))),
    )
    .expect("dimension 2")
    .with_scheme(DerivativeScheme::Analytic(derivs))
    .expect("analytic scheme")
    .with_domain(Arc::new(|x| x[1] > 0.0))
    .with_primitive(Arc::new(|x: &Coords| Ok(DVector::from_vec(vec![1.0 / x[1], 0.0]))))
}

/// Look up a builtin by its configuration name.
pub fn by_name(name: &str, b: f64) -> Option<ChartedSystem> {
    match name {
        "flat_torus" => Some(flat_torus(b)),
        "round_sphere" => Some(round_sphere(b)),
        "round_sphere_polar" => Some(round_sphere_polar()),
        "hyperbolic_chart" => Some(hyperbolic_chart()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: &[&str] = &["flat_torus", "round_sphere", "round_sphere_polar", "hyperbolic_chart"];
