use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use super::system::{ChartedSystem, Coords};
use crate::error::{Error, Result};

/// Rank-3 array indexed `(k, i, j)`, used for Christoffel symbols `Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.n + i) * self.n + j] = value;
    }

    /// `T^k_ij u^i v^j`.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.get(k, i, j) * u[i] * v[j];
                }
            }
            s
        })
    }

    /// Matrix `A^k_j = T^k_ij u^i`.
    pub fn contract_first(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.get(k, i, j) * u[i]).sum())
    }
}

/// First-order geometry at a point: metric, inverse, Christoffel symbols and
/// the Lorentz operator `Ω = g⁻¹σ`.
#[derive(Debug, Clone)]
pub struct Connection {
    pub x: Coords,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub gamma: Tensor3,
    /// Orientation sign of the chart used by surface formulas.
    pub orientable: bool,
}

fn invert_spd(g: &DMatrix<f64>, x: &Coords) -> Result<DMatrix<f64>> {
    let degenerate = || Error::DegenerateMetric { x: x.as_slice().to_vec() };
    let chol = g.clone().cholesky().ok_or_else(degenerate)?;
    let l = chol.l();
    let diag_min = l.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let diag_max = l.diagonal().amax();
    if !(diag_min > 1e-8 * diag_max) {
        return Err(degenerate());
    }
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

fn christoffel_from(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Tensor3 {
    let n = g_inv.nrows();
    let mut gamma = Tensor3::zeros(n);
    // lowered Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut lowered = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                lowered[(l * n + i) * n + j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|l| g_inv[(k, l)] * lowered[(l * n + i) * n + j]).sum();
                gamma.set(k, i, j, s);
                gamma.set(k, j, i, s);
            }
        }
    }
    gamma
}

impl Connection {
    pub fn at(sys: &ChartedSystem, x: &Coords) -> Result<Self> {
        let g = sys.metric_at(x)?;
        let g_inv = invert_spd(&g, x)?;
        let sigma = sys.two_form_at(x)?;
        let omega = &g_inv * &sigma;
        let dg = sys.metric_gradient(x)?;
        let gamma = christoffel_from(&g_inv, &dg);
        Ok(Self { x: x.clone(), g, g_inv, sigma, omega, gamma, orientable: sys.is_orientable() })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.g * v))
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u)
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.norm_sq(u).max(0.0).sqrt()
    }

    /// `Ω(w)`.
    pub fn lorentz(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.omega * w
    }

    /// `Γ(u, v)^k = Γ^k_ij u^i v^j`.
    pub fn christoffel_contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.gamma.contract(u, v)
    }

    /// Norm of a covector `θ` in the dual metric.
    pub fn covector_norm(&self, theta: &DVector<f64>) -> f64 {
        theta.dot(&(&self.g_inv * theta)).max(0.0).sqrt()
    }
}

/// Second-order geometry at a point: adds `∂Γ` and `∂Ω`, enough for the
/// Riemann tensor and the covariant derivative of `Ω`.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub connection: Connection,
    /// `∂_m Γ`, one tensor per coordinate direction `m`.
    pub d_gamma: Vec<Tensor3>,
    /// `∂_m Ω`.
    pub d_omega: Vec<DMatrix<f64>>,
}

impl Deref for PointGeometry {
    type Target = Connection;

    fn deref(&self) -> &Connection {
        &self.connection
    }
}

impl PointGeometry {
    pub fn at(sys: &ChartedSystem, x: &Coords) -> Result<Self> {
        let connection = Connection::at(sys, x)?;
        let n = connection.dim();
        let dg = sys.metric_gradient(x)?;
        let ddg = sys.metric_hessian(x)?;
        let dsigma = sys.two_form_gradient(x)?;
        let g_inv = &connection.g_inv;

        let d_g_inv: Vec<DMatrix<f64>> = dg.iter().map(|d| -(g_inv * d * g_inv)).collect();

        let mut lowered = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    lowered[(l * n + i) * n + j] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
            }
        }

        let mut d_gamma = Vec::with_capacity(n);
        for m in 0..n {
            let mut t = Tensor3::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let d_lowered = 0.5
                                * (ddg[m * n + i][(j, l)] + ddg[m * n + j][(i, l)] - ddg[m * n + l][(i, j)]);
                            s += d_g_inv[m][(k, l)] * lowered[(l * n + i) * n + j] + g_inv[(k, l)] * d_lowered;
                        }
                        t.set(k, i, j, s);
                        t.set(k, j, i, s);
                    }
                }
            }
            d_gamma.push(t);
        }

        let d_omega = (0..n)
            .map(|m| &d_g_inv[m] * &connection.sigma + g_inv * &dsigma[m])
            .collect();

        Ok(Self { connection, d_gamma, d_omega })
    }

    /// `(∂_u Γ)(v, w)^l = u^m ∂_m Γ^l_jk v^j w^k`.
    fn d_gamma_contract(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for m in 0..n {
            if u[m] != 0.0 {
                out += self.d_gamma[m].contract(v, w) * u[m];
            }
        }
        out
    }

    /// `R(u, v)w` with `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.
    pub fn riemann(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let c = &self.connection;
        self.d_gamma_contract(u, v, w) - self.d_gamma_contract(v, u, w)
            + c.christoffel_contract(u, &c.christoffel_contract(v, w))
            - c.christoffel_contract(v, &c.christoffel_contract(u, w))
    }

    /// `⟨R(u,v)v, u⟩ / (|u|²|v|² − ⟨u,v⟩²)`.
    pub fn sectional(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let area = self.norm_sq(u) * self.norm_sq(v) - self.inner(u, v).powi(2);
        self.inner(&self.riemann(u, v, v), u) / area
    }

    /// Matrix of `∇_w Ω` in coordinates.
    pub fn nabla_omega_matrix(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let c = &self.connection;
        let mut d = DMatrix::zeros(n, n);
        for m in 0..n {
            if w[m] != 0.0 {
                d += &self.d_omega[m] * w[m];
            }
        }
        let a = c.gamma.contract_first(w);
        d + &a * &c.omega - &c.omega * &a
    }

    /// `(∇_w Ω)(v)`.
    pub fn nabla_omega(&self, w: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.nabla_omega_matrix(w) * v
    }

    /// Ricci curvature `Ric(v) = Σ ⟨R(e_i, v)v, e_i⟩` over a g-orthonormal basis.
    pub fn ricci(&self, v: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
        basis.iter().map(|e| self.inner(&self.riemann(e, v, v), e)).sum()
    }
}
