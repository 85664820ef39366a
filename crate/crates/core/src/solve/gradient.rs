use nalgebra::DVector;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::outcome::{FailureKind, SearchFailure, SearchOutcome};
use super::shoot::{shoot, ShootOptions};
use crate::error::{Error, Result};
use crate::flow::PhaseState;
use crate::geom::ChartedSystem;
use crate::loopspace::{action_terms, chart_system, eta_residual, DiscreteLoop, LoopKinematics};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSchedule {
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Steps shorter than this (in the H¹ norm) end the descent.
    pub step_floor: f64,
    pub period_floor: f64,
    /// The cutoff `h(S)` vanishes below this action; `None` means `1e−6·k`.
    pub action_floor: Option<f64>,
    /// η residual below which a shooting polish is attempted.
    pub polish_threshold: f64,
    /// Scale range searched along the dilation string.
    pub dilation_range: (f64, f64),
    pub shoot: ShootOptions,
}

impl Default for GradientSchedule {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            initial_step: 0.05,
            step_floor: 1e-12,
            period_floor: 1e-3,
            action_floor: None,
            polish_threshold: 1e-2,
            dilation_range: (0.05, 20.0),
            shoot: ShootOptions::default(),
        }
    }
}

fn centroid(lp: &DiscreteLoop) -> DVector<f64> {
    lp.nodes.iter().fold(DVector::zeros(lp.dim()), |a, x| a + x) / lp.len() as f64
}

fn dilate(lp: &DiscreteLoop, centre: &DVector<f64>, s: f64) -> DiscreteLoop {
    let nodes = lp.nodes.iter().map(|x| centre + (x - centre) * s).collect();
    DiscreteLoop { nodes, period: lp.period * s, ..lp.clone() }
}

fn reversed(lp: &DiscreteLoop) -> DiscreteLoop {
    let n = lp.len();
    let nodes = (0..n).map(|i| lp.nodes[(n - i) % n].clone()).collect();
    DiscreteLoop { nodes, shift: -&lp.shift, winding: lp.winding.iter().map(|w| -w).collect(), ..lp.clone() }
}

fn inside(sys: &ChartedSystem, lp: &DiscreteLoop) -> bool {
    chart_system(sys, lp.chart).is_ok_and(|c| lp.nodes.iter().all(|x| c.in_domain(x)))
}

/// Action at the optimal period, or `None` where the loop is not admissible.
fn reduced_action(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64) -> Option<(f64, f64)> {
    if !inside(sys, lp) {
        return None;
    }
    let terms = action_terms(sys, lp).ok()?;
    let s = terms.reduced_action(k, lp.period);
    s.is_finite().then(|| (s, terms.best_period(k, lp.period)))
}

/// Dilation of `lp` with the largest reduced action at an interior maximum of
/// the dilation string `s ↦ c + s(γ − c)`.
fn mountain_pass(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, range: (f64, f64)) -> Option<DiscreteLoop> {
    let centre = centroid(lp);
    let count = 64;
    let ratio = (range.1 / range.0).ln();
    let grid: Vec<f64> = (0..count).map(|i| range.0 * (ratio * i as f64 / (count - 1) as f64).exp()).collect();
    let values: Vec<Option<f64>> = grid.iter().map(|&s| reduced_action(sys, &dilate(lp, &centre, s), k).map(|v| v.0)).collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..count - 1 {
        if let (Some(a), Some(b), Some(c)) = (values[i - 1], values[i], values[i + 1]) {
            if b >= a && b >= c && best.is_none_or(|(_, v)| b > v) {
                best = Some((i, b));
            }
        }
    }
    let (i, _) = best?;
    let s = golden_max(|s| reduced_action(sys, &dilate(lp, &centre, s), k).map_or(f64::NEG_INFINITY, |v| v.0), grid[i - 1], grid[i + 1]);
    let dilated = dilate(lp, &centre, s);
    let (_, period) = reduced_action(sys, &dilated, k)?;
    Some(dilated.with_period(period))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// H¹-preconditioned action gradient: node displacements and period component.
struct Gradient {
    nodes: Vec<DVector<f64>>,
    period: f64,
    /// `dS(G) = |G|²_H`.
    norm_sq: f64,
}

impl Gradient {
    fn dot_h(&self, other_nodes: &[DVector<f64>], other_period: f64, fft: &mut Smoother) -> f64 {
        fft.h1_inner(&self.nodes, other_nodes) + self.period * other_period
    }
}

/// Applies `(I − T²d²/dt²)⁻¹`-type smoothing by FFT.
struct Smoother {
    planner: FftPlanner<f64>,
}

impl Smoother {
    fn weights(n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let f = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                1.0 + (2.0 * std::f64::consts::PI * f).powi(2)
            })
            .collect()
    }

    fn transform(&mut self, field: &[DVector<f64>], inverse_weights: bool) -> Vec<DVector<f64>> {
        let n = field.len();
        let dim = field[0].len();
        let fwd = self.planner.plan_fft_forward(n);
        let inv = self.planner.plan_fft_inverse(n);
        let w = Self::weights(n);
        let mut out = vec![DVector::zeros(dim); n];
        for d in 0..dim {
            let mut buf: Vec<Complex<f64>> = field.iter().map(|v| Complex::new(v[d], 0.0)).collect();
            fwd.process(&mut buf);
            for (b, w) in buf.iter_mut().zip(&w) {
                *b = if inverse_weights { *b / *w } else { *b * *w };
            }
            inv.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                o[d] = b.re / n as f64;
            }
        }
        out
    }

    /// `(1/N)Σ[⟨a,b⟩ + T²⟨ȧ,ḃ⟩]` in coordinates.
    fn h1_inner(&mut self, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
        let wb = self.transform(b, false);
        a.iter().zip(&wb).map(|(x, y)| x.dot(y)).sum::<f64>() / a.len() as f64
    }
}

fn gradient(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, smoother: &mut Smoother) -> Result<Gradient> {
    let kin = LoopKinematics::new(sys, lp)?;
    let h = lp.step();
    let n = lp.len();
    let mut covector = Vec::with_capacity(n);
    let mut temporal = 0.0;
    for i in 0..n {
        let c = &kin.connections[i];
        covector.push(&c.g * kin.residual(i) * (-h));
        temporal += k - 0.5 * c.norm_sq(&kin.velocity[i]);
    }
    let period = h * temporal / lp.period;
    // Riesz map of the H¹ product: divide mode j by (1 + (2πj)²)/N
    let nodes: Vec<DVector<f64>> = smoother.transform(&covector, true).into_iter().map(|v| v * n as f64).collect();
    let norm_sq = covector.iter().zip(&nodes).map(|(c, g)| c.dot(g)).sum::<f64>() + period * period;
    Ok(Gradient { nodes, period, norm_sq })
}

fn cutoff(s: f64, floor: f64) -> f64 {
    ((s - floor) / floor).clamp(0.0, 1.0)
}

fn polish(sys: &ChartedSystem, lp: &DiscreteLoop, k: f64, options: &ShootOptions) -> Result<Option<SearchOutcome>> {
    if lp.chart != 0 {
        return Ok(None);
    }
    let kin = LoopKinematics::new(sys, lp)?;
    let speed = kin.speed(0);
    if !(speed > 0.0) {
        return Ok(None);
    }
    let v = &kin.velocity[0] * ((2.0 * k).sqrt() / speed);
    let seed = PhaseState { x: lp.nodes[0].clone(), v };
    Ok(Some(shoot(sys, k, &seed, lp.period, options)?))
}

fn not_found(kind: FailureKind, detail: impl Into<String>, it: usize, res: f64, trace: &[f64]) -> SearchOutcome {
    SearchOutcome::NotFound(SearchFailure::new(kind, detail, it, res, trace.to_vec()))
}

/// Closed-orbit search by descent of the discretized action.
///
/// Steps follow the saturated pseudo-gradient `h(S)·∇S/√(1 + |∇S|²)` in an
/// H¹ metric on loops. For contractible loops the initial loop is first
/// dilated about its centroid to the interior maximum of the reduced action
/// (trying the reversed orientation if needed); the descent then runs
/// transversally to the dilation direction, re-maximizing along it after
/// every step. Near-critical loops are handed to [`shoot`] for polishing.
pub fn gradient_search(sys: &ChartedSystem, k: f64, initial: &DiscreteLoop, schedule: &GradientSchedule) -> Result<SearchOutcome> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput("gradient search needs k > 0".into()));
    }
    if !(schedule.period_floor > 0.0 && schedule.step_floor > 0.0 && schedule.initial_step > 0.0) {
        return Err(Error::InvalidInput("schedule floors and step must be positive".into()));
    }
    let floor = schedule.action_floor.unwrap_or(1e-6 * k);
    action_terms(sys, initial)?;
    let mut trace = vec![initial.period];

    let r0 = eta_residual(sys, initial, k)?;
    if r0.passes() {
        if let Some(out @ SearchOutcome::Found(_)) = polish(sys, initial, k, &schedule.shoot)? {
            return Ok(out);
        }
    }

    let mut lp = initial.clone();
    let mut saddle = false;
    if lp.is_contractible() {
        for candidate in [initial.clone(), reversed(initial)] {
            if let Some(top) = mountain_pass(sys, &candidate, k, schedule.dilation_range) {
                lp = top;
                saddle = true;
                break;
            }
        }
    }

    let mut smoother = Smoother { planner: FftPlanner::new() };
    let mut alpha = schedule.initial_step;
    let mut last_polish = f64::INFINITY;
    let mut residual = f64::NAN;
    for it in 1..=schedule.max_iterations {
        if lp.period < schedule.period_floor {
            return Ok(not_found(
                FailureKind::PeriodCollapse,
                format!("loop shrinking toward constant: period {:.3e} below floor {:.1e}", lp.period, schedule.period_floor),
                it,
                residual,
                &trace,
            ));
        }
        let r = eta_residual(sys, &lp, k)?;
        residual = r.norm;
        if r.norm < schedule.polish_threshold && r.norm < 0.1 * last_polish {
            last_polish = r.norm;
            if let Some(out @ SearchOutcome::Found(_)) = polish(sys, &lp, k, &schedule.shoot)? {
                return Ok(out);
            }
        }

        let s0 = action_terms(sys, &lp)?.action(k, lp.period);
        let mut g = gradient(sys, &lp, k, &mut smoother)?;
        let centre = centroid(&lp);
        if saddle {
            let dn: Vec<DVector<f64>> = lp.nodes.iter().map(|x| x - &centre).collect();
            let dt = lp.period;
            let along = g.dot_h(&dn, dt, &mut smoother);
            let self_sq = smoother.h1_inner(&dn, &dn) + dt * dt;
            let c = along / self_sq;
            for (gn, d) in g.nodes.iter_mut().zip(&dn) {
                *gn -= d * c;
            }
            g.period -= c * dt;
            g.norm_sq = g.dot_h(&g.nodes.clone(), g.period, &mut smoother);
        }
        let scale = cutoff(s0, floor) / (1.0 + g.norm_sq).sqrt();
        let step_norm = scale * g.norm_sq.sqrt();
        let slope = scale * g.norm_sq;
        let mut accepted = None;
        while alpha * step_norm >= schedule.step_floor {
            let nodes = lp.nodes.iter().zip(&g.nodes).map(|(x, d)| x - d * (alpha * scale)).collect();
            let period = lp.period - alpha * scale * g.period;
            if period > 0.0 {
                let trial = DiscreteLoop { nodes, period, ..lp.clone() };
                if inside(sys, &trial) {
                    if let Ok(t) = action_terms(sys, &trial) {
                        let s1 = t.action(k, trial.period);
                        if s1 <= s0 - 1e-4 * alpha * slope {
                            accepted = Some(trial);
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some(mut next) = accepted else {
            let detail = if cutoff(s0, floor) == 0.0 {
                format!("action {s0:.3e} below floor {floor:.1e}; vanishing sequence")
            } else {
                "descent steps vanished before the residual gate; vanishing sequence".to_string()
            };
            return Ok(not_found(FailureKind::Vanishing, detail, it, residual, &trace));
        };
        alpha *= 1.5;
        if saddle {
            let c = centroid(&next);
            let best = golden_max(|s| reduced_action(sys, &dilate(&next, &c, s), k).map_or(f64::NEG_INFINITY, |v| v.0), 0.8, 1.25);
            let dilated = dilate(&next, &c, best);
            if let Some((_, period)) = reduced_action(sys, &dilated, k) {
                next = dilated.with_period(period);
            }
        }
        lp = next;
        trace.push(lp.period);
    }
    if let Some(out @ SearchOutcome::Found(_)) = polish(sys, &lp, k, &schedule.shoot)? {
        return Ok(out);
    }
    let kind = if saddle { FailureKind::MaxIterations } else { FailureKind::NoMountainPass };
    Ok(not_found(kind, "iteration cap reached", schedule.max_iterations, residual, &trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::builtins;
    use crate::solve::record::RecordOptions;
    use std::f64::consts::PI;

    fn schedule() -> GradientSchedule {
        GradientSchedule {
            shoot: ShootOptions { record: RecordOptions { nodes: 128, modes: Some(4), ..RecordOptions::default() }, ..ShootOptions::default() },
            ..GradientSchedule::default()
        }
    }

    #[test]
    fn smoother_round_trip() {
        let mut s = Smoother { planner: FftPlanner::new() };
        let f: Vec<DVector<f64>> = (0..16).map(|i| DVector::from_vec(vec![(i as f64).sin(), 1.0])).collect();
        let smooth = s.transform(&f, true);
        let back = s.transform(&smooth, false);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).amax() < 1e-13);
        }
    }

    #[test]
    fn small_circle_climbs_to_the_orbit() {
        let sys = builtins::flat_torus(1.0);
        for clockwise in [true, false] {
            let lp = DiscreteLoop::circle(&[0.3, 0.2], 0.5, 3.0, 128, clockwise).unwrap();
            let r = gradient_search(&sys, 0.5, &lp, &schedule()).unwrap().into_record().expect("orbit");
            assert!((r.period - 2.0 * PI).abs() < 1e-6, "{}", r.period);
        }
    }

    #[test]
    fn exact_orbit_is_accepted_immediately() {
        let sys = builtins::flat_torus(1.0);
        let (lp, _) =
            DiscreteLoop::sample_orbit(&sys, &PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]), 2.0 * PI, 128, 1e-13).unwrap();
        let r = gradient_search(&sys, 0.5, &lp, &schedule()).unwrap().into_record().unwrap();
        assert!((r.period - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn free_torus_loop_collapses() {
        let sys = builtins::flat_torus(0.0);
        let lp = DiscreteLoop::circle(&[0.0, 0.0], 0.5, 3.0, 64, true).unwrap();
        let out = gradient_search(&sys, 0.5, &lp, &schedule()).unwrap();
        let f = out.failure().expect("collapse");
        assert_eq!(f.kind, FailureKind::PeriodCollapse, "{f:?}");
    }
}
