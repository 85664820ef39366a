use nalgebra::DVector;
use serde::Serialize;

use super::dop853::{Dop853, StepControl};
use crate::error::{Error, Result};
use crate::geom::{ChartedSystem, Connection, Coords};

/// Point and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Coords,
    pub v: DVector<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self { x: DVector::from_vec(x), v: DVector::from_vec(v) }
    }

    pub fn energy(&self, sys: &ChartedSystem) -> Result<f64> {
        let g = sys.metric_at(&self.x)?;
        Ok(0.5 * self.v.dot(&(g * &self.v)))
    }
}

/// `(dx/dt, dv/dt) = (v, −Γ(v,v) + Ω v)`.
pub fn magnetic_ode_rhs(sys: &ChartedSystem, state: &PhaseState) -> Result<(DVector<f64>, DVector<f64>)> {
    let c = Connection::at(sys, &state.x)?;
    Ok((state.v.clone(), acceleration(&c, &state.v)))
}

pub(crate) fn acceleration(c: &Connection, v: &DVector<f64>) -> DVector<f64> {
    c.lorentz(v) - c.christoffel_contract(v, v)
}

fn rhs_for<'a>(sys: &'a ChartedSystem) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    let n = sys.dimension();
    move |t, y, dy| {
        let x = DVector::from_column_slice(&y[..n]);
        if !sys.in_domain(&x) {
            return Err(Error::LeftChart { t, x: y[..n].to_vec() });
        }
        let v = DVector::from_column_slice(&y[n..]);
        let c = Connection::at(sys, &x)?;
        let a = acceleration(&c, &v);
        dy[..n].copy_from_slice(&y[n..]);
        dy[n..].copy_from_slice(a.as_slice());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    /// Position reduced into the lattice fundamental domain.
    pub x: Coords,
    /// Position before lattice reduction.
    pub x_unwrapped: Coords,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
    /// 0 for the primary chart, 1 for the transition chart.
    pub chart: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorMeta {
    pub tolerance: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    pub projected: bool,
}

/// Time-sampled magnetic geodesic.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub samples: Vec<OrbitSample>,
    pub period: f64,
    /// Energy of the initial state.
    pub energy: f64,
    /// Position and velocity mismatch at `period`, after lattice reduction.
    pub closure_residual: f64,
    pub winding: Vec<i64>,
    /// `max |E(t) − E(0)|` over the samples.
    pub energy_drift: f64,
    pub meta: IntegratorMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub tolerance: f64,
    /// Rescale `|v|` to the initial energy after every step.
    pub project_energy: bool,
    /// Record exactly at these times (increasing, in `(0, t_end]`) instead of at every step.
    pub output_times: Option<Vec<f64>>,
    pub max_step: f64,
}

impl IntegrateOptions {
    pub fn new(tolerance: f64) -> Self {
        Self { tolerance, project_energy: false, output_times: None, max_step: f64::INFINITY }
    }

    /// `count` equally spaced output times on `(0, t_end]`.
    pub fn uniform(tolerance: f64, t_end: f64, count: usize) -> Self {
        let times = (1..=count).map(|i| t_end * i as f64 / count as f64).collect();
        Self { output_times: Some(times), ..Self::new(tolerance) }
    }
}

struct Recorder<'a> {
    charts: [&'a ChartedSystem; 2],
    samples: Vec<OrbitSample>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: &[f64], chart: usize) -> Result<()> {
        let sys = self.charts[chart];
        let n = sys.dimension();
        let x = DVector::from_column_slice(&y[..n]);
        let v = DVector::from_column_slice(&y[n..]);
        let c = Connection::at(sys, &x)?;
        let a = acceleration(&c, &v);
        let energy = 0.5 * c.norm_sq(&v);
        let (wrapped, _) = sys.wrap(&x);
        self.samples.push(OrbitSample { t, x: wrapped, x_unwrapped: x, v, a, chart, energy });
        Ok(())
    }
}

/// Integrate the magnetic geodesic flow from `state0` up to `t_end`.
pub fn integrate(sys: &ChartedSystem, state0: &PhaseState, t_end: f64, options: &IntegrateOptions) -> Result<Orbit> {
    let n = sys.dimension();
    if state0.x.len() != n || state0.v.len() != n {
        return Err(Error::Dimension { expected: n, got: state0.x.len() });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidInput("t_end must be positive".into()));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    if !sys.in_domain(&state0.x) {
        return Err(Error::LeftChart { t: 0.0, x: state0.x.as_slice().to_vec() });
    }
    if let Some(times) = &options.output_times {
        if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) || times[0] <= 0.0 || *times.last().unwrap() > t_end {
            return Err(Error::InvalidInput("output times must increase within (0, t_end]".into()));
        }
    }

    let alternate = sys.transition().map(|tr| tr.alternate.as_ref());
    let charts = [sys, alternate.unwrap_or(sys)];
    let control = StepControl { max_step: options.max_step, ..StepControl::with_tolerance(options.tolerance) };
    let mut rec = Recorder { charts, samples: Vec::new() };
    let mut chart = 0usize;
    let mut y0: Vec<f64> = state0.x.iter().chain(state0.v.iter()).copied().collect();
    rec.push(0.0, &y0, 0)?;
    let e0 = rec.samples[0].energy;
    if !(e0 > 0.0) {
        return Err(Error::ZeroVelocity);
    }

    let mut stops: Vec<f64> = options.output_times.clone().unwrap_or_default();
    if stops.last().is_none_or(|&t| t < t_end) {
        stops.push(t_end);
    }
    let record_all = options.output_times.is_none();
    let (mut accepted, mut rejected, mut evaluations) = (0, 0, 0);
    let mut t = 0.0;
    let mut stop_idx = 0;

    'charts: loop {
        let mut stepper = Dop853::new(rhs_for(charts[chart]), t, y0.clone(), control)?;
        while stop_idx < stops.len() {
            let stop = stops[stop_idx];
            stepper.step(stop)?;
            t = stepper.t;
            let mut y = stepper.y.clone();
            let x = DVector::from_column_slice(&y[..n]);
            if !charts[chart].in_domain(&x) {
                return Err(Error::LeftChart { t, x: y[..n].to_vec() });
            }
            if options.project_energy {
                let c = Connection::at(charts[chart], &x)?;
                let v = DVector::from_column_slice(&y[n..]);
                let scale = (e0 / (0.5 * c.norm_sq(&v))).sqrt();
                for vi in &mut y[n..] {
                    *vi *= scale;
                }
                stepper.reset(t, y.clone())?;
            }
            let hit = t == stop;
            if hit {
                stop_idx += 1;
            }
            if record_all || hit {
                rec.push(t, &y, chart)?;
            }
            if let Some(tr) = sys.transition() {
                if x.norm() > tr.safe_radius && stop_idx < stops.len() {
                    let (xm, vm) = (tr.map)(&x, &DVector::from_column_slice(&y[n..]));
                    y0 = xm.iter().chain(vm.iter()).copied().collect();
                    chart ^= 1;
                    accepted += stepper.accepted;
                    rejected += stepper.rejected;
                    evaluations += stepper.evaluations;
                    continue 'charts;
                }
            }
        }
        accepted += stepper.accepted;
        rejected += stepper.rejected;
        evaluations += stepper.evaluations;
        break;
    }

    let energy_drift = rec.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max);
    let first = &rec.samples[0];
    let (x_end, v_end) = base_chart_state(sys, rec.samples.last().unwrap());
    let dx = sys.reduced_difference(&first.x_unwrapped, &x_end);
    let dv = &v_end - &first.v;
    let closure_residual = (dx.norm_squared() + dv.norm_squared()).sqrt();
    let raw = &x_end - &first.x_unwrapped;
    let winding = sys
        .lattice()
        .iter()
        .enumerate()
        .map(|(i, l)| l.map_or(0, |l| (raw[i] / l).round() as i64))
        .collect();

    Ok(Orbit {
        samples: rec.samples,
        period: t_end,
        energy: e0,
        closure_residual,
        winding,
        energy_drift,
        meta: IntegratorMeta {
            tolerance: options.tolerance,
            accepted_steps: accepted,
            rejected_steps: rejected,
            evaluations,
            projected: options.project_energy,
        },
    })
}

fn base_chart_state(sys: &ChartedSystem, sample: &OrbitSample) -> (Coords, DVector<f64>) {
    if sample.chart == 0 {
        (sample.x_unwrapped.clone(), sample.v.clone())
    } else {
        let tr = sys.transition().expect("chart 1 implies a transition");
        (tr.map)(&sample.x_unwrapped, &sample.v)
    }
}

impl Orbit {
    /// Final position (on the lift) and velocity, expressed in chart 0.
    pub fn end_state(&self, sys: &ChartedSystem) -> PhaseState {
        let (x, v) = base_chart_state(sys, self.samples.last().unwrap());
        PhaseState { x, v }
    }

    pub fn is_single_chart(&self) -> bool {
        self.samples.iter().all(|s| s.chart == self.samples[0].chart)
    }

    /// Position, velocity and chart at time `t` from the quintic Hermite
    /// interpolant through the samples (unwrapped coordinates).
    pub fn interpolate(&self, t: f64) -> Result<(Coords, DVector<f64>, usize)> {
        let s = &self.samples;
        if !(t >= s[0].t && t <= s[s.len() - 1].t) {
            return Err(Error::InvalidInput(format!("time {t} outside the orbit samples")));
        }
        let i = match s.binary_search_by(|p| p.t.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok((s[i].x_unwrapped.clone(), s[i].v.clone(), s[i].chart)),
            Err(i) => i - 1,
        };
        let (a, b) = (&s[i], &s[i + 1]);
        if a.chart != b.chart {
            return Err(Error::MultiChart);
        }
        let (x, v) = hermite5(a, b, t);
        Ok((x, v, a.chart))
    }

    /// CSV with columns `t, x1..xn, v1..vn, E`.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.samples[0].x.len();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.push("E".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![s.t.to_string()];
            rec.extend(s.x.iter().map(f64::to_string));
            rec.extend(s.v.iter().map(f64::to_string));
            rec.push(s.energy.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn summary(&self) -> OrbitSummary {
        OrbitSummary {
            period: self.period,
            energy: self.energy,
            closure_residual: self.closure_residual,
            winding: self.winding.clone(),
            energy_drift: self.energy_drift,
            samples: self.samples.len(),
            initial_x: self.samples[0].x_unwrapped.as_slice().to_vec(),
            initial_v: self.samples[0].v.as_slice().to_vec(),
            meta: self.meta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSummary {
    pub period: f64,
    pub energy: f64,
    pub closure_residual: f64,
    pub winding: Vec<i64>,
    pub energy_drift: f64,
    pub samples: usize,
    pub initial_x: Vec<f64>,
    pub initial_v: Vec<f64>,
    pub meta: IntegratorMeta,
}

/// Quintic Hermite interpolation of position from `(x, v, a)` at two samples;
/// returns position and its time derivative.
pub(crate) fn hermite5(a: &OrbitSample, b: &OrbitSample, t: f64) -> (DVector<f64>, DVector<f64>) {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
    let w = [
        1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
        h * (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5),
        h * h * (0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5),
        10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        h * (-4.0 * s3 + 7.0 * s4 - 3.0 * s5),
        h * h * (0.5 * s3 - s4 + 0.5 * s5),
    ];
    let dw = [
        (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / h,
        1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
        h * (s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4),
        (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / h,
        -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
        h * (1.5 * s2 - 4.0 * s3 + 2.5 * s4),
    ];
    let terms = [&a.x_unwrapped, &a.v, &a.a, &b.x_unwrapped, &b.v, &b.a];
    let mut x = DVector::zeros(a.v.len());
    let mut v = DVector::zeros(a.v.len());
    for (i, term) in terms.iter().enumerate() {
        x += *term * w[i];
        v += *term * dw[i];
    }
    (x, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::builtins;
    use std::f64::consts::PI;

    #[test]
    fn torus_circle_closes() {
        let sys = builtins::flat_torus(1.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let (dx, dv) = magnetic_ode_rhs(&sys, &s0).unwrap();
        assert_eq!(dx, s0.v);
        assert_eq!(dv, DVector::from_vec(vec![0.0, -1.0]));
        let orbit = integrate(&sys, &s0, 2.0 * PI, &IntegrateOptions::new(1e-12)).unwrap();
        assert!(orbit.closure_residual < 1e-8, "{}", orbit.closure_residual);
        assert_eq!(orbit.winding, vec![0, 0]);
    }

    #[test]
    fn uniform_output_hits_requested_times() {
        let sys = builtins::flat_torus(1.0);
        let s0 = PhaseState::new(vec![1.0, 1.0], vec![1.0, 0.0]);
        let orbit = integrate(&sys, &s0, 2.0 * PI, &IntegrateOptions::uniform(1e-12, 2.0 * PI, 64)).unwrap();
        assert_eq!(orbit.samples.len(), 65);
        for (i, s) in orbit.samples.iter().enumerate() {
            let t = 2.0 * PI * i as f64 / 64.0;
            assert!((s.t - t).abs() < 1e-14);
            // x = x0 + (sin t, cos t − 1)
            assert!((s.x_unwrapped[0] - 1.0 - t.sin()).abs() < 1e-9);
            assert!((s.x_unwrapped[1] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_is_accurate() {
        let sys = builtins::flat_torus(1.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let orbit = integrate(&sys, &s0, 2.0 * PI, &IntegrateOptions::new(1e-12)).unwrap();
        for t in [0.1, 1.234, 3.0, 6.0] {
            let (x, v, _) = orbit.interpolate(t).unwrap();
            assert!((x[0] - t.sin()).abs() < 1e-8 && (x[1] - t.cos() + 1.0).abs() < 1e-8);
            assert!((v[0] - t.cos()).abs() < 1e-7 && (v[1] + t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn straight_lines_without_field() {
        let sys = builtins::flat_torus(0.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.5]);
        let orbit = integrate(&sys, &s0, 10.0, &IntegrateOptions::new(1e-10)).unwrap();
        let last = orbit.samples.last().unwrap();
        assert!((last.x_unwrapped[0] - 10.0).abs() < 1e-12 && (last.x_unwrapped[1] - 5.0).abs() < 1e-12);
        assert_eq!(orbit.winding, vec![2, 1]);
        assert!(last.x[0] >= 0.0 && last.x[0] < 2.0 * PI);
    }

    #[test]
    fn leaving_the_half_plane_is_an_error() {
        let sys = builtins::hyperbolic_chart();
        // a hyperbolic geodesic never reaches y = 0, so push the state out directly
        let s0 = PhaseState::new(vec![0.0, -1.0], vec![1.0, 0.0]);
        assert!(matches!(
            integrate(&sys, &s0, 1.0, &IntegrateOptions::new(1e-10)),
            Err(Error::LeftChart { .. })
        ));
    }

    #[test]
    fn sphere_great_circle_through_both_charts() {
        // unit-speed great circle through the north pole chart origin: x(t) = tan(t/2) e1
        let sys = builtins::round_sphere(0.0);
        let s0 = PhaseState::new(vec![0.0, 0.0], vec![0.5, 0.0]);
        let orbit = integrate(&sys, &s0, 2.0 * PI, &IntegrateOptions::new(1e-12)).unwrap();
        assert!(!orbit.is_single_chart());
        assert!(orbit.closure_residual < 1e-8, "{}", orbit.closure_residual);
        assert!(orbit.energy_drift < 1e-10);
    }
}
