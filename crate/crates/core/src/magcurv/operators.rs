use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::frames::{orthonormal_complement, require_orthogonal, require_orthonormal, require_unit};
use crate::geom::{ChartedSystem, Connection, Coords, PointGeometry};

fn require_energy(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidInput(format!("energy must be positive, got {k}")));
    }
    Ok(())
}

/// `A^Ω(v, w) = ¾⟨w,Ωv⟩Ωv − ¼Ω²w − ¼⟨Ωw,Ωv⟩v`.
pub fn a_omega(c: &Connection, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    require_unit(c, v)?;
    require_orthogonal(c, v, w)?;
    Ok(a_omega_unchecked(c, v, w))
}

fn a_omega_unchecked(c: &Connection, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let ov = c.lorentz(v);
    let ow = c.lorentz(w);
    let oow = c.lorentz(&ow);
    &ov * (0.75 * c.inner(w, &ov)) - oow * 0.25 - v * (0.25 * c.inner(&ow, &ov))
}

/// `R^Ω_k(v,w) = 2k R(w,v)v − √(2k)[(∇_wΩ)v − ½(∇_vΩ)w + ½⟨(∇_vΩ)w, v⟩v]`.
pub fn r_omega_k(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    require_energy(k)?;
    require_unit(p, v)?;
    require_orthogonal(p, v, w)?;
    Ok(r_omega_k_unchecked(p, v, w, k))
}

fn r_omega_k_unchecked(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>, k: f64) -> DVector<f64> {
    let s = (2.0 * k).sqrt();
    let nv_w = p.nabla_omega(v, w);
    let bracket = p.nabla_omega(w, v) - &nv_w * 0.5 + v * (0.5 * p.inner(&nv_w, v));
    p.riemann(w, v, v) * (2.0 * k) - bracket * s
}

/// Magnetic curvature operator `M^Ω_k(v, w) = R^Ω_k(v,w) + A^Ω(v,w)`.
///
/// `w` need not be unit, which makes `⟨M(v,w),w⟩` usable where `w` is small.
pub fn m_omega_k(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    require_energy(k)?;
    require_unit(p, v)?;
    require_orthogonal(p, v, w)?;
    Ok(r_omega_k_unchecked(p, v, w, k) + a_omega_unchecked(p, v, w))
}

/// The three k-independent parts of `Sec^Ω_k = 2k·a − √(2k)·b + c`.
fn sec_parts(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>) -> [f64; 3] {
    let ov = p.lorentz(v);
    let ow = p.lorentz(w);
    [
        p.inner(&p.riemann(w, v, v), w),
        p.inner(&p.nabla_omega(w, v), w),
        0.75 * p.inner(w, &ov).powi(2) + 0.25 * p.norm_sq(&ow),
    ]
}

fn combine(parts: [f64; 3], k: f64) -> f64 {
    2.0 * k * parts[0] - (2.0 * k).sqrt() * parts[1] + parts[2]
}

/// `Sec^Ω_k(v,w) = 2k Sec(v,w) − √(2k)⟨(∇_wΩ)v, w⟩ + ¾⟨w,Ωv⟩² + ¼|Ωw|²`.
pub fn sec_omega_k(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>, k: f64) -> Result<f64> {
    require_energy(k)?;
    require_orthonormal(p, v, w)?;
    Ok(combine(sec_parts(p, v, w), k))
}

/// `Ric^Ω_k(v)` as the trace of `⟨M^Ω_k(v,·),·⟩` over an orthonormal basis of `{v}^⊥`.
pub fn ric_omega_k(p: &PointGeometry, v: &DVector<f64>, k: f64) -> Result<f64> {
    require_energy(k)?;
    require_unit(p, v)?;
    let basis = orthonormal_complement(p, v)?;
    Ok(ric_with_basis(p, v, k, &basis))
}

/// Same trace over a caller-supplied orthonormal basis of `{v}^⊥`.
pub fn ric_with_basis(p: &PointGeometry, v: &DVector<f64>, k: f64, basis: &[DVector<f64>]) -> f64 {
    basis.iter().map(|e| combine(sec_parts(p, v, e), k)).sum()
}

/// `Ric^Ω_k(v)` from basis-free coordinate traces:
/// `2k tr(w ↦ R(w,v)v) − √(2k) tr(w ↦ (∇_wΩ)v) + ½|Ωv|² − ¼ tr(Ω²)`.
pub fn ric_omega_k_trace(p: &PointGeometry, v: &DVector<f64>, k: f64) -> Result<f64> {
    require_energy(k)?;
    require_unit(p, v)?;
    let n = p.dim();
    let mut ric = 0.0;
    let mut nab = 0.0;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        ric += p.riemann(&e, v, v)[i];
        nab += p.nabla_omega(&e, v)[i];
    }
    let ov = p.lorentz(v);
    let trace_a = 0.5 * p.norm_sq(&ov) - 0.25 * (&p.omega * &p.omega).trace();
    Ok(2.0 * k * ric - (2.0 * k).sqrt() * nab + trace_a)
}

/// `trace A^Ω(v,·) = Σ⟨e_i,Ωv⟩² + ¼Σ_ij⟨Ωe_i,e_j⟩²` over an orthonormal basis of `{v}^⊥`.
pub fn trace_a_omega(c: &Connection, v: &DVector<f64>) -> Result<f64> {
    require_unit(c, v)?;
    let basis = orthonormal_complement(c, v)?;
    let ov = c.lorentz(v);
    let mut first = 0.0;
    let mut second = 0.0;
    for ei in &basis {
        first += c.inner(ei, &ov).powi(2);
        let oe = c.lorentz(ei);
        for ej in &basis {
            second += c.inner(&oe, ej).powi(2);
        }
    }
    Ok(first + 0.25 * second)
}

/// Matrix of `w ↦ M^Ω_k(v,w)` on `{v}^⊥` in an orthonormal basis, with the basis.
/// Entry `(i, j)` is `⟨M(v, e_j), e_i⟩`.
pub fn curvature_operator_matrix(
    p: &PointGeometry,
    v: &DVector<f64>,
    k: f64,
) -> Result<(Vec<DVector<f64>>, DMatrix<f64>)> {
    require_energy(k)?;
    require_unit(p, v)?;
    let basis = orthonormal_complement(p, v)?;
    let images: Vec<DVector<f64>> =
        basis.iter().map(|e| r_omega_k_unchecked(p, v, e, k) + a_omega_unchecked(p, v, e)).collect();
    let m = basis.len();
    let mat = DMatrix::from_fn(m, m, |i, j| p.inner(&images[j], &basis[i]));
    Ok((basis, mat))
}

/// Smallest `Sec^Ω_k(v, w)` over unit `w ⊥ v`: the lowest eigenvalue of the
/// symmetrized curvature operator.
pub fn min_sec_omega_k(p: &PointGeometry, v: &DVector<f64>, k: f64) -> Result<f64> {
    let (_, m) = curvature_operator_matrix(p, v, k)?;
    let sym = (&m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

/// Curvature values at one point of the unit sphere bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub k: f64,
    pub sec: Option<f64>,
    pub ric: f64,
    pub trace_a: f64,
}

impl CurvatureSample {
    pub fn evaluate(sys: &ChartedSystem, x: &Coords, v: &DVector<f64>, w: Option<&DVector<f64>>, k: f64) -> Result<Self> {
        let p = PointGeometry::at(sys, x)?;
        let sec = w.map(|w| sec_omega_k(&p, v, w, k)).transpose()?;
        Ok(Self {
            x: x.as_slice().to_vec(),
            v: v.as_slice().to_vec(),
            w: w.map(|w| w.as_slice().to_vec()),
            k,
            sec,
            ric: ric_omega_k(&p, v, k)?,
            trace_a: trace_a_omega(&p, v)?,
        })
    }
}

/// Complex structure `J = g⁻¹μ_g` of an oriented surface chart, so that `Ω = bJ`.
pub fn rotation_j(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() != 2 {
        return Err(Error::Dimension { expected: 2, got: g.nrows() });
    }
    let det = g.determinant();
    let mu = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]) * det.sqrt();
    let inv = g.clone().try_inverse().ok_or(Error::DegenerateMetric { x: vec![] })?;
    Ok(inv * mu)
}

/// Surface quantities at a point: Gauss curvature `K`, magnetic strength
/// `b = σ_12/√det g`, its differential and `J`.
#[derive(Debug, Clone)]
pub struct SurfaceData {
    pub gauss: f64,
    pub b: f64,
    pub db: DVector<f64>,
    pub j: DMatrix<f64>,
}

pub fn surface_data(sys: &ChartedSystem, x: &Coords) -> Result<SurfaceData> {
    if sys.dimension() != 2 {
        return Err(Error::InvalidInput("surface formula needs a two-dimensional system".into()));
    }
    if !sys.is_orientable() {
        return Err(Error::InvalidInput("surface formula needs an oriented chart".into()));
    }
    let p = PointGeometry::at(sys, x)?;
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    let e2 = DVector::from_vec(vec![0.0, 1.0]);
    let gauss = p.sectional(&e1, &e2);
    let det = p.g.determinant();
    let sqrt_det = det.sqrt();
    let s12 = p.sigma[(0, 1)];
    let b = s12 / sqrt_det;
    let dg = sys.metric_gradient(x)?;
    let ds = sys.two_form_gradient(x)?;
    let db = DVector::from_fn(2, |m, _| {
        let d_det = det * (&p.g_inv * &dg[m]).trace();
        ds[m][(0, 1)] / sqrt_det - 0.5 * s12 * d_det / (det * sqrt_det)
    });
    Ok(SurfaceData { gauss, b, db, j: rotation_j(&p.g)? })
}

/// `Sec^b_k = 2kK − √(2k)·db(Jv) + b²`, with `jv = J v` for a unit `v`.
pub fn surface_sec_b(gauss: f64, b: f64, db: &DVector<f64>, jv: &DVector<f64>, k: f64) -> Result<f64> {
    require_energy(k)?;
    if db.len() != 2 || jv.len() != 2 {
        return Err(Error::Dimension { expected: 2, got: db.len().max(jv.len()) });
    }
    if ![gauss, b].iter().chain(db.iter()).chain(jv.iter()).all(|a| a.is_finite()) {
        return Err(Error::InvalidInput("non-finite surface data".into()));
    }
    Ok(2.0 * k * gauss - (2.0 * k).sqrt() * db.dot(jv) + b * b)
}

/// k-independent parts of a sample, reusable across an energy grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitCurvature {
    pub sec: [f64; 3],
    pub ric: [f64; 3],
}

impl SplitCurvature {
    pub fn at(p: &PointGeometry, v: &DVector<f64>, w: &DVector<f64>) -> Result<Self> {
        let sec = sec_parts(p, v, w);
        let mut ric = [0.0; 3];
        for e in orthonormal_complement(p, v)? {
            let s = sec_parts(p, v, &e);
            for i in 0..3 {
                ric[i] += s[i];
            }
        }
        Ok(Self { sec, ric })
    }

    pub fn sec(&self, k: f64) -> f64 {
        combine(self.sec, k)
    }

    pub fn ric(&self, k: f64) -> f64 {
        combine(self.ric, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::builtins;
    use approx::assert_abs_diff_eq;

    fn e(i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(2);
        v[i] = 1.0;
        v
    }

    #[test]
    fn torus_values() {
        let sys = builtins::flat_torus(1.0);
        let p = PointGeometry::at(&sys, &DVector::from_vec(vec![0.4, 0.1])).unwrap();
        let a = a_omega(&p, &e(0), &e(1)).unwrap();
        assert_abs_diff_eq!(p.inner(&a, &e(1)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sec_omega_k(&p, &e(0), &e(1), 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ric_omega_k(&p, &e(0), 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_a_omega(&p, &e(0)).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(r_omega_k(&p, &e(0), &e(1), 0.5).unwrap().amax(), 0.0);
    }

    #[test]
    fn frame_violations_are_errors() {
        let sys = builtins::flat_torus(1.0);
        let p = PointGeometry::at(&sys, &DVector::zeros(2)).unwrap();
        let bad = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(a_omega(&p, &bad, &e(1)), Err(Error::FrameViolation(_))));
        assert!(matches!(sec_omega_k(&p, &e(0), &bad.normalize(), 0.5), Err(Error::FrameViolation(_))));
        assert!(sec_omega_k(&p, &e(0), &e(1), 0.0).is_err());
    }

    #[test]
    fn surface_data_of_modulated_torus() {
        let sys = builtins::modulated_torus(1.0, 0.2);
        let x = DVector::from_vec(vec![0.7, 2.0]);
        let s = surface_data(&sys, &x).unwrap();
        assert_abs_diff_eq!(s.b, 1.0 + 0.2 * 0.7f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.db[0], 0.2 * 0.7f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.gauss, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_surface_data() {
        let sys = builtins::hyperbolic_chart();
        let s = surface_data(&sys, &DVector::from_vec(vec![0.3, 0.8])).unwrap();
        assert_abs_diff_eq!(s.gauss, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.b, 1.0, epsilon = 1e-14);
        assert!(s.db.amax() < 1e-13);
    }
}
