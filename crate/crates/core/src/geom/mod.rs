//! Chart-level tensor calculus for magnetic systems `(g, σ)`.

pub mod builtins;
pub mod frames;
pub mod sampling;
pub mod system;
pub mod tensor;

use nalgebra::DVector;

use crate::error::Result;
pub use frames::{orthonormal_complement, orthonormal_frame, TangentSample};
pub use system::{
    AnalyticDerivatives, ChartTransition, ChartedSystem, Coords, CovectorField, DerivativeScheme, MatrixField,
    MatrixListField,
};
pub use tensor::{Connection, PointGeometry, Tensor3};

/// Christoffel symbols `Γ^k_ij` at `x`.
pub fn christoffel(sys: &ChartedSystem, x: &Coords) -> Result<Tensor3> {
    Ok(Connection::at(sys, x)?.gamma)
}

/// `R(u, v)w` at `x`.
pub fn riemann(sys: &ChartedSystem, x: &Coords, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(PointGeometry::at(sys, x)?.riemann(u, v, w))
}

/// `Ω(w)` at `x`.
pub fn lorentz(sys: &ChartedSystem, x: &Coords, w: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Connection::at(sys, x)?.lorentz(w))
}

/// `(∇_w Ω)(v)` at `x`.
pub fn nabla_omega(sys: &ChartedSystem, x: &Coords, w: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(PointGeometry::at(sys, x)?.nabla_omega(w, v))
}
