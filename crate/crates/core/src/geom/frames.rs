use nalgebra::DVector;

use super::tensor::Connection;
use crate::error::{Error, Result};

/// Tolerance for unit-length and orthogonality checks on caller frames.
pub const FRAME_TOL: f64 = 1e-12;

/// A point with one or two tangent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSample {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub w: Option<DVector<f64>>,
}

pub fn require_unit(c: &Connection, v: &DVector<f64>) -> Result<()> {
    if v.len() != c.dim() {
        return Err(Error::Dimension { expected: c.dim(), got: v.len() });
    }
    let n = c.norm(v);
    if (n - 1.0).abs() > FRAME_TOL {
        return Err(Error::FrameViolation(format!("|v| = {n}, expected 1")));
    }
    Ok(())
}

pub fn require_orthogonal(c: &Connection, v: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
    if w.len() != c.dim() {
        return Err(Error::Dimension { expected: c.dim(), got: w.len() });
    }
    let scale = c.norm(w).max(1.0);
    let ip = c.inner(v, w);
    if ip.abs() > FRAME_TOL * scale {
        return Err(Error::FrameViolation(format!("<v,w> = {ip:e}, expected 0")));
    }
    Ok(())
}

pub fn require_orthonormal(c: &Connection, v: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
    require_unit(c, v)?;
    require_unit(c, w)?;
    require_orthogonal(c, v, w)
}

fn project_out(c: &Connection, mut r: DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    // two passes of modified Gram–Schmidt
    for _ in 0..2 {
        for b in basis {
            let p = c.inner(&r, b);
            r -= b * p;
        }
    }
    r
}

/// g-orthonormal basis of `{v}^⊥`, built by Gram–Schmidt on the coordinate
/// basis, always taking the candidate with the largest residual next.
pub fn orthonormal_complement(c: &Connection, v: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let n = c.dim();
    let nv = c.norm(v);
    if !(nv > 0.0) || !nv.is_finite() {
        return Err(Error::DegenerateFrame);
    }
    let mut basis = vec![v / nv];
    let mut remaining: Vec<usize> = (0..n).collect();
    for _ in 1..n {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (slot, &i) in remaining.iter().enumerate() {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            // scale the candidate to unit g-length so residuals are comparable
            e /= c.norm(&e);
            let r = project_out(c, e, &basis);
            let rn = c.norm(&r);
            if best.as_ref().is_none_or(|b| rn > b.2) {
                best = Some((slot, r, rn));
            }
        }
        let (slot, r, rn) = best.ok_or(Error::DegenerateFrame)?;
        if !(rn > 1e-10) {
            return Err(Error::DegenerateFrame);
        }
        basis.push(r / rn);
        remaining.remove(slot);
    }
    basis.remove(0);
    Ok(basis)
}

/// g-orthonormal basis `{v/|v|, e_2, ..., e_n}`.
pub fn orthonormal_frame(c: &Connection, v: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let mut frame = vec![v / c.norm(v)];
    frame.extend(orthonormal_complement(c, v)?);
    Ok(frame)
}

/// Orthonormalize an arbitrary list of vectors (in order); fails if they are
/// linearly dependent.
pub fn gram_schmidt(c: &Connection, vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let r = project_out(c, v.clone(), &basis);
        let rn = c.norm(&r);
        if !(rn > 1e-10 * c.norm(v).max(1e-300)) {
            return Err(Error::DegenerateFrame);
        }
        basis.push(r / rn);
    }
    Ok(basis)
}
