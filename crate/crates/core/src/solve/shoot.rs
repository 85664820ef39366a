use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::outcome::{FailureKind, SearchFailure, SearchOutcome};
use super::record::{build_record, RecordOptions};
use crate::error::{Error, Result};
use crate::flow::{integrate, IntegrateOptions, PhaseState};
use crate::geom::{ChartedSystem, Connection};

/// Which lattice class the closing condition asks for.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum WindingTarget {
    /// `x(T) = x(0)` on the lift.
    #[default]
    Contractible,
    /// `x(T) = x(0)` modulo the lattice.
    Any,
    Fixed(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOptions {
    pub tolerance: f64,
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub period_floor: f64,
    pub winding: WindingTarget,
    pub record: RecordOptions,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            residual_tol: 1e-10,
            max_iterations: 40,
            period_floor: 1e-3,
            winding: WindingTarget::Contractible,
            record: RecordOptions::default(),
        }
    }
}

struct Periodicity<'a> {
    sys: &'a ChartedSystem,
    speed: f64,
    x_ref: DVector<f64>,
    v_ref: DVector<f64>,
    shift: Option<DVector<f64>>,
    tolerance: f64,
}

impl Periodicity<'_> {
    fn state(&self, z: &DVector<f64>) -> Result<(PhaseState, f64)> {
        let n = self.sys.dimension();
        let x = z.rows(0, n).into_owned();
        let u = z.rows(n, n).into_owned();
        let c = Connection::at(self.sys, &x)?;
        let norm = c.norm(&u);
        if !(norm > 0.0) {
            return Err(Error::ZeroVelocity);
        }
        Ok((PhaseState { x, v: u * (self.speed / norm) }, z[2 * n]))
    }

    /// `[x(T) − x₀ − shift; v(T) − v₀; ⟨x₀ − x_ref, v_ref⟩; |u|² − 1]`.
    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.sys.dimension();
        let (state, t) = self.state(z)?;
        if !(t > 0.0) {
            return Err(Error::InvalidInput("nonpositive period".into()));
        }
        let orbit = integrate(self.sys, &state, t, &IntegrateOptions::new(self.tolerance))?;
        let end = orbit.end_state(self.sys);
        let dx = match &self.shift {
            Some(s) => &end.x - &state.x - s,
            None => self.sys.reduced_difference(&state.x, &end.x),
        };
        let mut f = DVector::zeros(2 * n + 2);
        f.rows_mut(0, n).copy_from(&dx);
        f.rows_mut(n, n).copy_from(&(&end.v - &state.v));
        f[2 * n] = (&state.x - &self.x_ref).dot(&self.v_ref);
        let c = Connection::at(self.sys, &state.x)?;
        f[2 * n + 1] = c.norm_sq(&z.rows(n, n).into_owned()) - 1.0;
        Ok(f)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = z.len();
        let mut jac = DMatrix::zeros(m + 1, m);
        for j in 0..m {
            let d = 1e-6 * z[j].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += d;
            zm[j] -= d;
            let col = (self.residual(&zp)? - self.residual(&zm)?) / (2.0 * d);
            jac.set_column(j, &col);
        }
        Ok(jac)
    }
}

fn shift_for(sys: &ChartedSystem, target: &WindingTarget) -> Result<Option<DVector<f64>>> {
    let n = sys.dimension();
    let w = match target {
        WindingTarget::Any => return Ok(None),
        WindingTarget::Contractible => vec![0; n],
        WindingTarget::Fixed(w) => w.clone(),
    };
    if w.len() != n {
        return Err(Error::Dimension { expected: n, got: w.len() });
    }
    let mut s = DVector::zeros(n);
    for (d, (&wd, l)) in w.iter().zip(sys.lattice()).enumerate() {
        match l {
            Some(l) => s[d] = wd as f64 * l,
            None if wd != 0 => return Err(Error::InvalidInput(format!("winding along non-periodic axis {d}"))),
            None => {}
        }
    }
    Ok(Some(s))
}

/// Newton shooting for a closed orbit of energy `k` near `seed`.
///
/// Unknowns are `(x₀, u, T)` with `v₀ = √(2k)·u/|u|`, so the energy is fixed
/// exactly. A phase condition removes time translation; the remaining
/// symmetry directions are handled by minimum-norm SVD steps.
pub fn shoot(sys: &ChartedSystem, k: f64, seed: &PhaseState, t_guess: f64, options: &ShootOptions) -> Result<SearchOutcome> {
    let n = sys.dimension();
    if seed.x.len() != n || seed.v.len() != n {
        return Err(Error::Dimension { expected: n, got: seed.x.len() });
    }
    if !(k > 0.0) || !(t_guess > 0.0) || !t_guess.is_finite() {
        return Err(Error::InvalidInput("shooting needs k > 0 and a positive period guess".into()));
    }
    let speed = (2.0 * k).sqrt();
    let c = Connection::at(sys, &seed.x)?;
    if (c.norm(&seed.v) - speed).abs() > 1e-12 * speed.max(1.0) {
        return Err(Error::InvalidInput(format!("seed speed {} differs from sqrt(2k) = {speed}", c.norm(&seed.v))));
    }
    let problem = Periodicity {
        sys,
        speed,
        x_ref: seed.x.clone(),
        v_ref: seed.v.clone(),
        shift: shift_for(sys, &options.winding)?,
        tolerance: options.tolerance,
    };
    let mut z = DVector::zeros(2 * n + 1);
    z.rows_mut(0, n).copy_from(&seed.x);
    z.rows_mut(n, n).copy_from(&(&seed.v / speed));
    z[2 * n] = t_guess;

    let fail = |kind, detail: String, it, res, trace: &Vec<f64>| Ok(SearchOutcome::NotFound(SearchFailure::new(kind, detail, it, res, trace.clone())));
    let mut trace = vec![t_guess];
    let mut f = match problem.residual(&z) {
        Ok(f) => f,
        Err(e) => return fail(FailureKind::Integration, format!("seed integration failed: {e}"), 0, f64::NAN, &trace),
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let fnorm = f.norm();
        // integration error grows with the orbit length
        if fnorm < options.residual_tol * (1.0 + speed * z[2 * n]) {
            converged = true;
            break;
        }
        iterations += 1;
        let jac = match problem.jacobian(&z) {
            Ok(j) => j,
            Err(e) => {
                return fail(FailureKind::Degenerate, format!("degenerate periodicity system; perturb seed ({e})"), iterations, fnorm, &trace)
            }
        };
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || !smax.is_finite() {
            return fail(FailureKind::Degenerate, "degenerate periodicity system; perturb seed".into(), iterations, fnorm, &trace);
        }
        let dz = match svd.solve(&(-&f), 1e-12 * smax) {
            Ok(dz) => dz,
            Err(msg) => return fail(FailureKind::Degenerate, format!("degenerate periodicity system; perturb seed ({msg})"), iterations, fnorm, &trace),
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..16 {
            let trial = &z + &dz * lambda;
            if trial[2 * n] > 0.0 {
                if let Ok(ft) = problem.residual(&trial) {
                    if ft.norm() < fnorm {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((zt, ft)) => {
                let moved = (&zt - &z).norm();
                z = zt;
                f = ft;
                // at the integration noise floor steps become tiny while |F| barely moves
                let floor = f.norm() < 1e3 * options.residual_tol;
                if floor && (moved < 1e-11 * (1.0 + z.norm()) || f.norm() > 0.9 * fnorm) {
                    converged = true;
                    trace.push(z[2 * n]);
                    break;
                }
            }
            None if fnorm < 1e3 * options.residual_tol => {
                converged = true;
                break;
            }
            None => return fail(FailureKind::Vanishing, "Newton line search stalled".into(), iterations, fnorm, &trace),
        }
        trace.push(z[2 * n]);
        if z[2 * n] < options.period_floor {
            return fail(
                FailureKind::PeriodCollapse,
                format!("loop shrinking toward constant: period {:.3e} below floor", z[2 * n]),
                iterations,
                f.norm(),
                &trace,
            );
        }
    }
    if !converged {
        return fail(FailureKind::MaxIterations, "iteration cap reached".into(), iterations, f.norm(), &trace);
    }
    let (state, period) = problem.state(&z)?;
    let contractible_expected = options.winding == WindingTarget::Contractible;
    let record = match build_record(sys, &state, period, k, contractible_expected, &options.record) {
        Ok(r) => r,
        Err(e) => return fail(FailureKind::Uncertified, format!("record evaluation failed: {e}"), iterations, f.norm(), &trace),
    };
    if !record.is_certified() {
        let detail = format!(
            "converged but not certified (closure {:.2e}, energy {:.2e}, eta {:.2e})",
            record.closure_residual, record.energy_residual, record.eta.norm
        );
        return fail(FailureKind::Uncertified, detail, iterations, f.norm(), &trace);
    }
    Ok(SearchOutcome::Found(Box::new(record)))
}

/// Shoot from every seed in parallel; found records come first, ordered by
/// closure residual then period.
pub fn shoot_many(sys: &ChartedSystem, k: f64, seeds: &[(PhaseState, f64)], options: &ShootOptions) -> Result<Vec<SearchOutcome>> {
    let mut out = seeds.par_iter().map(|(s, t)| shoot(sys, k, s, *t, options)).collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| match (a.found(), b.found()) {
        (Some(x), Some(y)) => x
            .closure_residual
            .total_cmp(&y.closure_residual)
            .then(x.period.total_cmp(&y.period)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(out)
}
