use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{integrate, IntegrateOptions, Orbit, PhaseState};
use crate::geom::{ChartedSystem, PointGeometry};
use crate::loopspace::{eta_residual, morse_index, DiscreteLoop, EtaResidual, IndexFrame, IndexOptions, IndexReport};
use crate::magcurv::{min_sec_omega_k, ric_omega_k};
use crate::SCHEMA_VERSION;

/// Gates an orbit has to pass to be called certified.
pub const ENERGY_GATE: f64 = 1e-8;
pub const CLOSURE_GATE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    pub nodes: usize,
    /// Fourier modes for the index; `None` skips it.
    pub modes: Option<usize>,
    pub frame: IndexFrame,
    pub tolerance: f64,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { nodes: 512, modes: Some(32), frame: IndexFrame::Coordinate, tolerance: 1e-12 }
    }
}

impl RecordOptions {
    pub fn without_index(mut self) -> Self {
        self.modes = None;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordFlags {
    pub energy_ok: bool,
    pub closure_ok: bool,
    pub eta_ok: bool,
    pub certified: bool,
}

/// A closed orbit candidate with everything the certification checks need.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub schema_version: u32,
    pub system: String,
    pub k: f64,
    pub period: f64,
    pub initial_x: Vec<f64>,
    pub initial_v: Vec<f64>,
    pub closure_residual: f64,
    /// `max |E(t) − k|` over the recorded samples.
    pub energy_residual: f64,
    pub eta: EtaResidual,
    pub index: Option<IndexReport>,
    pub winding: Vec<i64>,
    pub contractible: bool,
    /// Whether the search asked for a contractible orbit.
    pub contractible_expected: bool,
    pub min_ric: f64,
    pub min_sec: f64,
    pub flags: RecordFlags,
    #[serde(skip)]
    pub orbit: Orbit,
    #[serde(skip)]
    pub discrete: DiscreteLoop,
}

impl OrbitRecord {
    pub fn initial_state(&self) -> PhaseState {
        PhaseState::new(self.initial_x.clone(), self.initial_v.clone())
    }

    pub fn is_certified(&self) -> bool {
        self.flags.certified
    }

    pub fn morse(&self) -> Option<usize> {
        self.index.as_ref().map(|r| r.negative)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Integrate `state0` over one period, resample to `nodes` nodes and evaluate
/// residuals, curvature minima along the orbit and (optionally) the index.
pub fn build_record(
    sys: &ChartedSystem,
    state0: &PhaseState,
    period: f64,
    k: f64,
    contractible_expected: bool,
    options: &RecordOptions,
) -> Result<OrbitRecord> {
    let orbit = integrate(sys, state0, period, &IntegrateOptions::uniform(options.tolerance, period, options.nodes))?;
    let discrete = DiscreteLoop::from_uniform_orbit(sys, &orbit, options.nodes)?;
    let eta = eta_residual(sys, &discrete, k)?;
    let energy_residual = orbit.samples.iter().map(|s| (s.energy - k).abs()).fold(0.0, f64::max);

    let csys = crate::loopspace::chart_system(sys, discrete.chart)?;
    let mut min_ric = f64::INFINITY;
    let mut min_sec = f64::INFINITY;
    for s in &orbit.samples[..options.nodes] {
        let p = PointGeometry::at(csys, &s.x_unwrapped)?;
        let speed = p.norm(&s.v);
        if !(speed > 0.0) {
            return Err(Error::ZeroVelocity);
        }
        let u: DVector<f64> = &s.v / speed;
        min_ric = min_ric.min(ric_omega_k(&p, &u, k)?);
        min_sec = min_sec.min(min_sec_omega_k(&p, &u, k)?);
    }

    let energy_ok = energy_residual < ENERGY_GATE;
    let closure_ok = orbit.closure_residual < CLOSURE_GATE;
    let eta_ok = eta.passes();
    let certified = energy_ok && closure_ok && eta_ok;
    let index = match options.modes {
        Some(m) if eta_ok => Some(morse_index(sys, &discrete, k, &IndexOptions::new(m).with_frame(options.frame))?),
        _ => None,
    };
    let winding = orbit.winding.clone();
    Ok(OrbitRecord {
        schema_version: SCHEMA_VERSION,
        system: sys.name().to_string(),
        k,
        period,
        initial_x: state0.x.iter().copied().collect(),
        initial_v: state0.v.iter().copied().collect(),
        closure_residual: orbit.closure_residual,
        energy_residual,
        eta,
        index,
        contractible: winding.iter().all(|&w| w == 0),
        winding,
        contractible_expected,
        min_ric,
        min_sec,
        flags: RecordFlags { energy_ok, closure_ok, eta_ok, certified },
        orbit,
        discrete,
    })
}

/// CSV summary table, one row per record.
pub fn records_csv(records: &[OrbitRecord], checks: &[bool]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["k", "period", "index", "min_ric", "min_sec", "closure_residual", "certified", "checks"])
        .map_err(ser)?;
    for (i, r) in records.iter().enumerate() {
        let index = r.morse().map_or_else(String::new, |m| m.to_string());
        let check = checks.get(i).map_or("", |&c| if c { "pass" } else { "fail" });
        w.write_record([
            format!("{}", r.k),
            format!("{:.12e}", r.period),
            index,
            format!("{:.12e}", r.min_ric),
            format!("{:.12e}", r.min_sec),
            format!("{:.3e}", r.closure_residual),
            r.flags.certified.to_string(),
            check.to_string(),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}
