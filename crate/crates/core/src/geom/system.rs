use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Chart coordinates of a point.
pub type Coords = DVector<f64>;

/// Result type of user-supplied field closures. The message is wrapped into
/// [`Error::Field`] together with the query point.
pub type FieldResult<T> = std::result::Result<T, String>;

pub type MatrixField = Arc<dyn Fn(&Coords) -> FieldResult<DMatrix<f64>> + Send + Sync>;
pub type CovectorField = Arc<dyn Fn(&Coords) -> FieldResult<DVector<f64>> + Send + Sync>;
pub type MatrixListField = Arc<dyn Fn(&Coords) -> FieldResult<Vec<DMatrix<f64>>> + Send + Sync>;
pub type DomainPredicate = Arc<dyn Fn(&Coords) -> bool + Send + Sync>;
/// Tangent map `(x, v) -> (x', v')` between two charts. Linear in `v`.
pub type TangentMap = Arc<dyn Fn(&Coords, &DVector<f64>) -> (Coords, DVector<f64>) + Send + Sync>;

/// User-supplied coordinate derivatives of the metric and the two-form.
#[derive(Clone)]
pub struct AnalyticDerivatives {
    /// `[∂_i g]` for `i = 0..n`.
    pub metric_gradient: MatrixListField,
    /// `[∂_i ∂_j g]` stored row-major at `i * n + j`.
    pub metric_hessian: MatrixListField,
    /// `[∂_i σ]` for `i = 0..n`.
    pub two_form_gradient: MatrixListField,
}

#[derive(Clone)]
pub enum DerivativeScheme {
    Analytic(AnalyticDerivatives),
    /// Central differences. `step` is used for first derivatives and
    /// `curvature_step` for the second derivatives of the metric; both are
    /// scaled by `max(1, |x_i|)`.
    FiniteDifference { step: f64, curvature_step: f64 },
}

impl DerivativeScheme {
    pub const DEFAULT_STEP: f64 = 1e-5;
    pub const DEFAULT_CURVATURE_STEP: f64 = 1e-4;

    pub fn finite_difference(step: f64) -> Self {
        DerivativeScheme::FiniteDifference {
            step,
            curvature_step: (step * 10.0).max(Self::DEFAULT_CURVATURE_STEP.min(step.sqrt())),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, DerivativeScheme::Analytic(_))
    }
}

impl fmt::Debug for DerivativeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivativeScheme::Analytic(_) => write!(f, "Analytic"),
            DerivativeScheme::FiniteDifference { step, curvature_step } => f
                .debug_struct("FiniteDifference")
                .field("step", step)
                .field("curvature_step", curvature_step)
                .finish(),
        }
    }
}

/// A second chart reached through an involutive tangent map once the point
/// leaves the ball of radius `safe_radius`.
#[derive(Clone)]
pub struct ChartTransition {
    pub safe_radius: f64,
    pub map: TangentMap,
    pub alternate: Arc<ChartedSystem>,
}

/// A magnetic system `(g, σ)` written in one coordinate chart.
///
/// Field closures must be deterministic. Values are validated at every query:
/// the metric has to be symmetric positive definite and the two-form
/// antisymmetric, otherwise the query fails instead of returning garbage.
#[derive(Clone)]
pub struct ChartedSystem {
    name: String,
    dimension: usize,
    metric: MatrixField,
    two_form: MatrixField,
    primitive: Option<CovectorField>,
    lattice: Vec<Option<f64>>,
    scheme: DerivativeScheme,
    domain: Option<DomainPredicate>,
    transition: Option<ChartTransition>,
    orientable: bool,
}

impl fmt::Debug for ChartedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartedSystem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("primitive", &self.primitive.is_some())
            .field("lattice", &self.lattice)
            .field("scheme", &self.scheme)
            .field("transition", &self.transition.is_some())
            .finish()
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

impl ChartedSystem {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        metric: MatrixField,
        two_form: MatrixField,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            metric,
            two_form,
            primitive: None,
            lattice: vec![None; dimension],
            scheme: DerivativeScheme::finite_difference(DerivativeScheme::DEFAULT_STEP),
            domain: None,
            transition: None,
            orientable: true,
        })
    }

    pub fn with_primitive(mut self, primitive: CovectorField) -> Self {
        self.primitive = Some(primitive);
        self
    }

    pub fn with_lattice(mut self, lattice: Vec<Option<f64>>) -> Result<Self> {
        if lattice.len() != self.dimension {
            return Err(Error::Dimension { expected: self.dimension, got: lattice.len() });
        }
        if lattice.iter().flatten().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput("lattice periods must be positive".into()));
        }
        self.lattice = lattice;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: DerivativeScheme) -> Result<Self> {
        if let DerivativeScheme::FiniteDifference { step, curvature_step } = &scheme {
            if !(*step > 0.0) || !(*curvature_step > 0.0) {
                return Err(Error::InvalidInput("finite-difference steps must be positive".into()));
            }
        }
        self.scheme = scheme;
        Ok(self)
    }

    pub fn with_domain(mut self, domain: DomainPredicate) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_transition(mut self, transition: ChartTransition) -> Self {
        self.transition = Some(transition);
        self
    }

    pub fn with_orientable(mut self, orientable: bool) -> Self {
        self.orientable = orientable;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lattice(&self) -> &[Option<f64>] {
        &self.lattice
    }

    pub fn has_lattice(&self) -> bool {
        self.lattice.iter().any(Option::is_some)
    }

    pub fn scheme(&self) -> &DerivativeScheme {
        &self.scheme
    }

    pub fn transition(&self) -> Option<&ChartTransition> {
        self.transition.as_ref()
    }

    pub fn is_orientable(&self) -> bool {
        self.orientable
    }

    pub fn has_primitive(&self) -> bool {
        self.primitive.is_some()
    }

    pub fn in_domain(&self, x: &Coords) -> bool {
        x.iter().all(|c| c.is_finite()) && self.domain.as_ref().is_none_or(|d| d(x))
    }

    fn check_point(&self, x: &Coords) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Dimension { expected: self.dimension, got: x.len() });
        }
        Ok(())
    }

    fn eval_matrix(&self, field: &MatrixField, x: &Coords) -> Result<DMatrix<f64>> {
        let m = field(x).map_err(|message| Error::Field { x: x.as_slice().to_vec(), message })?;
        if m.nrows() != self.dimension || m.ncols() != self.dimension {
            return Err(Error::Dimension { expected: self.dimension, got: m.nrows() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x: x.as_slice().to_vec() });
        }
        Ok(m)
    }

    fn eval_list(&self, field: &MatrixListField, x: &Coords, len: usize) -> Result<Vec<DMatrix<f64>>> {
        let list = field(x).map_err(|message| Error::Field { x: x.as_slice().to_vec(), message })?;
        if list.len() != len {
            return Err(Error::Dimension { expected: len, got: list.len() });
        }
        for m in &list {
            if m.nrows() != self.dimension || m.ncols() != self.dimension {
                return Err(Error::Dimension { expected: self.dimension, got: m.nrows() });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x: x.as_slice().to_vec() });
            }
        }
        Ok(list)
    }

    /// Raw metric values without the positivity check; used for differencing.
    fn metric_raw(&self, x: &Coords) -> Result<DMatrix<f64>> {
        self.eval_matrix(&self.metric, x)
    }

    /// Metric at `x`, checked for symmetry. Positivity is checked when the
    /// Cholesky factor is built in [`crate::geom::Connection`].
    pub fn metric_at(&self, x: &Coords) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let g = self.metric_raw(x)?;
        let scale = g.amax().max(1.0);
        let residual = (&g - g.transpose()).amax();
        if residual > SYMMETRY_TOL * scale {
            return Err(Error::AsymmetricMetric { x: x.as_slice().to_vec(), residual });
        }
        Ok(g)
    }

    pub fn two_form_at(&self, x: &Coords) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let s = self.eval_matrix(&self.two_form, x)?;
        let scale = s.amax().max(1.0);
        let residual = (&s + s.transpose()).amax();
        if residual > SYMMETRY_TOL * scale {
            return Err(Error::NonAntisymmetricForm { x: x.as_slice().to_vec(), residual });
        }
        Ok(s)
    }

    pub fn primitive_at(&self, x: &Coords) -> Result<Option<DVector<f64>>> {
        self.check_point(x)?;
        let Some(p) = &self.primitive else { return Ok(None) };
        let theta = p(x).map_err(|message| Error::Field { x: x.as_slice().to_vec(), message })?;
        if theta.len() != self.dimension {
            return Err(Error::Dimension { expected: self.dimension, got: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x: x.as_slice().to_vec() });
        }
        Ok(Some(theta))
    }

    fn fd_steps(&self, x: &Coords, base: f64) -> Result<Vec<f64>> {
        x.iter()
            .map(|&xi| {
                let h = base * xi.abs().max(1.0);
                if !(h > 1e-14 * xi.abs().max(1.0)) || (xi + h) - xi == 0.0 {
                    Err(Error::StepTooSmall { x: x.as_slice().to_vec() })
                } else {
                    Ok(h)
                }
            })
            .collect()
    }

    fn shifted(x: &Coords, i: usize, h: f64) -> Coords {
        let mut y = x.clone();
        y[i] += h;
        y
    }

    /// `[∂_i g]` at `x`.
    pub fn metric_gradient(&self, x: &Coords) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        match &self.scheme {
            DerivativeScheme::Analytic(d) => self.eval_list(&d.metric_gradient, x, self.dimension),
            DerivativeScheme::FiniteDifference { step, .. } => {
                let hs = self.fd_steps(x, *step)?;
                (0..self.dimension)
                    .map(|i| {
                        let plus = self.metric_raw(&Self::shifted(x, i, hs[i]))?;
                        let minus = self.metric_raw(&Self::shifted(x, i, -hs[i]))?;
                        Ok((plus - minus) / (2.0 * hs[i]))
                    })
                    .collect()
            }
        }
    }

    /// `[∂_i ∂_j g]` at `x`, row-major in `(i, j)`.
    pub fn metric_hessian(&self, x: &Coords) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        let n = self.dimension;
        match &self.scheme {
            DerivativeScheme::Analytic(d) => self.eval_list(&d.metric_hessian, x, n * n),
            DerivativeScheme::FiniteDifference { curvature_step, .. } => {
                let hs = self.fd_steps(x, *curvature_step)?;
                let g0 = self.metric_raw(x)?;
                let mut out = vec![DMatrix::zeros(n, n); n * n];
                for i in 0..n {
                    let plus = self.metric_raw(&Self::shifted(x, i, hs[i]))?;
                    let minus = self.metric_raw(&Self::shifted(x, i, -hs[i]))?;
                    out[i * n + i] = (plus - &g0 * 2.0 + minus) / (hs[i] * hs[i]);
                    for j in (i + 1)..n {
                        let pp = self.metric_raw(&Self::shifted(&Self::shifted(x, i, hs[i]), j, hs[j]))?;
                        let pm = self.metric_raw(&Self::shifted(&Self::shifted(x, i, hs[i]), j, -hs[j]))?;
                        let mp = self.metric_raw(&Self::shifted(&Self::shifted(x, i, -hs[i]), j, hs[j]))?;
                        let mm = self.metric_raw(&Self::shifted(&Self::shifted(x, i, -hs[i]), j, -hs[j]))?;
                        let d = (pp - pm - mp + mm) / (4.0 * hs[i] * hs[j]);
                        out[i * n + j] = d.clone();
                        out[j * n + i] = d;
                    }
                }
                Ok(out)
            }
        }
    }

    /// `[∂_i σ]` at `x`.
    pub fn two_form_gradient(&self, x: &Coords) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        match &self.scheme {
            DerivativeScheme::Analytic(d) => self.eval_list(&d.two_form_gradient, x, self.dimension),
            DerivativeScheme::FiniteDifference { step, .. } => {
                let hs = self.fd_steps(x, *step)?;
                (0..self.dimension)
                    .map(|i| {
                        let plus = self.eval_matrix(&self.two_form, &Self::shifted(x, i, hs[i]))?;
                        let minus = self.eval_matrix(&self.two_form, &Self::shifted(x, i, -hs[i]))?;
                        Ok((plus - minus) / (2.0 * hs[i]))
                    })
                    .collect()
            }
        }
    }

    /// Reduce `x` into the fundamental domain `[0, L_i)` of the lattice.
    /// Returns the reduced point and the integer shift applied per axis.
    pub fn wrap(&self, x: &Coords) -> (Coords, Vec<i64>) {
        let mut y = x.clone();
        let mut shifts = vec![0i64; self.dimension];
        for (i, period) in self.lattice.iter().enumerate() {
            if let Some(l) = period {
                let q = (x[i] / l).floor();
                y[i] = x[i] - q * l;
                shifts[i] = q as i64;
            }
        }
        (y, shifts)
    }

    /// Difference `b - a` reduced to the nearest lattice image.
    pub fn reduced_difference(&self, a: &Coords, b: &Coords) -> Coords {
        let mut d = b - a;
        for (i, period) in self.lattice.iter().enumerate() {
            if let Some(l) = period {
                d[i] -= (d[i] / l).round() * l;
            }
        }
        d
    }

    /// Largest residual `|dθ - σ|` over `points`, with `dθ` taken by central
    /// differences of step `h`.
    pub fn primitive_residual(&self, points: &[Coords], h: f64) -> Result<f64> {
        if self.primitive.is_none() {
            return Err(Error::NoPrimitive);
        }
        let n = self.dimension;
        let mut worst = 0.0f64;
        for x in points {
            let sigma = self.two_form_at(x)?;
            let mut dtheta = DMatrix::zeros(n, n);
            for i in 0..n {
                let hi = h * x[i].abs().max(1.0);
                let plus = self.primitive_at(&Self::shifted(x, i, hi))?.unwrap();
                let minus = self.primitive_at(&Self::shifted(x, i, -hi))?.unwrap();
                let d = (plus - minus) / (2.0 * hi);
                for j in 0..n {
                    dtheta[(i, j)] += d[j];
                    dtheta[(j, i)] -= d[j];
                }
            }
            worst = worst.max((dtheta - sigma).amax());
        }
        Ok(worst)
    }
}
