use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::discrete::DiscreteLoop;
use super::hessian::HessianContext;
use super::variations::{coordinate_frame, transported_frame, FrameField};
use crate::error::{Error, Result};
use crate::geom::ChartedSystem;
use crate::SCHEMA_VERSION;

/// Default relative threshold: `ε_idx = 1e−7 · max|λ|`.
pub const DEFAULT_INDEX_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexFrame {
    /// Coordinate vectors `∂_b`.
    Coordinate,
    /// Magnetically transported orthonormal frame; needs a closing frame.
    Transported,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub modes: usize,
    pub frame: IndexFrame,
    pub relative_eps: f64,
}

impl IndexOptions {
    pub fn new(modes: usize) -> Self {
        Self { modes, frame: IndexFrame::Coordinate, relative_eps: DEFAULT_INDEX_EPS }
    }

    pub fn with_frame(mut self, frame: IndexFrame) -> Self {
        self.frame = frame;
        self
    }
}

/// Eigenvalue count of the projected Hessian against the H¹ Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub schema_version: u32,
    pub mode_count: usize,
    pub dimension: usize,
    pub frame: IndexFrame,
    pub nodes: usize,
    /// Ascending generalized eigenvalues.
    pub eigenvalues: Vec<f64>,
    pub negative: usize,
    pub near_zero: usize,
    pub positive: usize,
    pub eps: f64,
}

impl IndexReport {
    pub fn index(&self) -> usize {
        self.negative
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// `i,eigenvalue,class` rows.
    pub fn spectrum_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["i", "eigenvalue", "class"]).map_err(ser)?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let class = if *l <= -self.eps {
                "negative"
            } else if *l < self.eps {
                "near_zero"
            } else {
                "positive"
            };
            w.write_record([i.to_string(), format!("{l:e}"), class.to_string()]).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Hessian and Gram matrices on the truncated Fourier basis.
#[derive(Debug, Clone, Serialize)]
pub struct IndexProblem {
    pub schema_version: u32,
    pub hessian: Vec<Vec<f64>>,
    pub gram: Vec<Vec<f64>>,
}

impl IndexProblem {
    fn from_matrices(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Self {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self { schema_version: SCHEMA_VERSION, hessian: rows(h), gram: rows(g) }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Values `(c, dc/dt)` of the Fourier basis functions at time fraction `s`,
/// ordered `1, cos 2πs, sin 2πs, ..., cos 2πms, sin 2πms`.
fn fourier_values(s: f64, modes: usize, period: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 0.0)];
    for j in 1..=modes {
        let w = 2.0 * PI * j as f64;
        let (sn, cs) = (w * s).sin_cos();
        out.push((cs, -w / period * sn));
        out.push((sn, w / period * cs));
    }
    out
}

/// Per-node matrix whose columns are `z = (V, DV/dt, τ)` for every basis element.
fn node_basis(frame: &FrameField, node: usize, fourier: &[(f64, f64)], n: usize) -> DMatrix<f64> {
    let dim = fourier.len() * n + 1;
    let mut z = DMatrix::zeros(2 * n + 1, dim);
    let e = &frame.fields[node];
    let de = &frame.derivatives[node];
    for (f, &(c, dc)) in fourier.iter().enumerate() {
        for b in 0..n {
            let col = f * n + b;
            let v = &e[b] * c;
            let d = &e[b] * dc + &de[b] * c;
            z.view_mut((0, col), (n, 1)).copy_from(&v);
            z.view_mut((n, col), (n, 1)).copy_from(&d);
        }
    }
    z[(2 * n, dim - 1)] = 1.0;
    z
}

/// Assemble `H = Σ h ZᵢᵀMᵢZᵢ` and the Gram matrix of
/// `(1/N)Σ[⟨V,V'⟩ + T²⟨DV,DV'⟩] + ττ'`.
pub fn assemble_index_problem(ctx: &HessianContext, lp: &DiscreteLoop, frame: &FrameField, modes: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = lp.dim();
    let count = lp.len();
    let h = lp.step();
    let t2 = lp.period * lp.period;
    let per_node: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let fourier = fourier_values(i as f64 / count as f64, modes, lp.period);
            let z = node_basis(frame, i, &fourier, n);
            let mz = &ctx.node_forms[i] * &z;
            let g = &ctx.geometry[i].g;
            let mut w = DMatrix::zeros(2 * n + 1, 2 * n + 1);
            w.view_mut((0, 0), (n, n)).copy_from(g);
            w.view_mut((n, n), (n, n)).copy_from(&(g * t2));
            let wz = w * &z;
            (z, mz, wz)
        })
        .collect();
    let dim = per_node[0].0.ncols();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .into_par_iter()
        .map(|a| {
            let mut hr = vec![0.0; dim];
            let mut gr = vec![0.0; dim];
            for (z, mz, wz) in &per_node {
                let za = z.column(a);
                for b in 0..dim {
                    hr[b] += za.dot(&mz.column(b));
                    gr[b] += za.dot(&wz.column(b));
                }
            }
            (hr, gr)
        })
        .collect();
    let mut hm = DMatrix::zeros(dim, dim);
    let mut gm = DMatrix::zeros(dim, dim);
    for (a, (hr, gr)) in rows.iter().enumerate() {
        for b in 0..dim {
            hm[(a, b)] = h * hr[b];
            gm[(a, b)] = gr[b] / count as f64;
        }
    }
    gm[(dim - 1, dim - 1)] += 1.0;
    let hm = (&hm + hm.transpose()) * 0.5;
    let gm = (&gm + gm.transpose()) * 0.5;
    (hm, gm)
}

/// Eigenvalues of `L⁻¹HL⁻ᵀ` with `G = LLᵀ`, ascending.
pub fn generalized_eigenvalues(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = g.clone().cholesky().ok_or_else(|| Error::EigenSolver("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let singular = || Error::EigenSolver("singular Cholesky factor".into());
    let a = l.solve_lower_triangular(h).ok_or_else(singular)?;
    let c = l.solve_lower_triangular(&a.transpose()).ok_or_else(singular)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolver("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenSolver("non-finite eigenvalue".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn classify(values: Vec<f64>, relative_eps: f64) -> (Vec<f64>, usize, usize, usize, f64) {
    let scale = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let eps = relative_eps * scale;
    let negative = values.iter().filter(|&&v| v <= -eps).count();
    let positive = values.iter().filter(|&&v| v >= eps).count();
    let near_zero = values.len() - negative - positive;
    (values, negative, near_zero, positive, eps)
}

/// Morse index estimate of a critical loop on `m` Fourier modes times a frame,
/// plus the period direction.
pub fn morse_index(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, options: &IndexOptions) -> Result<IndexReport> {
    morse_index_with_problem(sys, lp, k, options).map(|(r, _)| r)
}

/// As [`morse_index`], also returning the assembled matrices.
pub fn morse_index_with_problem(
    sys: &ChartedSystem,
    lp: &DiscreteLoop,
    k: f64,
    options: &IndexOptions,
) -> Result<(IndexReport, IndexProblem)> {
    if !(options.relative_eps > 0.0) {
        return Err(Error::InvalidInput("index threshold must be positive".into()));
    }
    let ctx = HessianContext::new(sys, lp, k)?;
    let frame = match options.frame {
        IndexFrame::Coordinate => coordinate_frame(&ctx.kinematics),
        IndexFrame::Transported => transported_frame(sys, lp)?,
    };
    let (hm, gm) = assemble_index_problem(&ctx, lp, &frame, options.modes);
    let (eigenvalues, negative, near_zero, positive, eps) =
        classify(generalized_eigenvalues(&hm, &gm)?, options.relative_eps);
    let report = IndexReport {
        schema_version: SCHEMA_VERSION,
        mode_count: options.modes,
        dimension: hm.nrows(),
        frame: options.frame,
        nodes: lp.len(),
        eigenvalues,
        negative,
        near_zero,
        positive,
        eps,
    };
    Ok((report, IndexProblem::from_matrices(&hm, &gm)))
}

/// Coefficient vector of a basis element, for tests and diagnostics.
pub fn basis_vector(dimension: usize, index: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dimension);
    e[index] = 1.0;
    e
}
