use anyhow::{anyhow, Context, Result};
use magcurv_core::flow::{integrate, magnetic_transport, IntegrateOptions, PhaseState};
use magcurv_core::geom::sampling::{halton_points, random_unit, random_unit_orthogonal, seeded_rng};
use magcurv_core::loopspace::{mane_upper_bound, morse_index_with_problem, DiscreteLoop, IndexFrame, IndexOptions};
use magcurv_core::magcurv::{positivity_scan, theorem_b_scan, CurvatureSample};
use magcurv_core::nalgebra::DVector;
use magcurv_core::solve::{
    certify, continue_in_k, gradient_search, records_csv, shoot, Certification, ContinuationOptions, GradientSchedule,
    OrbitRecord, RecordOptions, SearchFailure, SearchOutcome, ShootOptions,
};
use magcurv_core::{ChartedSystem, Connection, PointGeometry, SCHEMA_VERSION};
use serde::Serialize;

use crate::config::{Command, Format, Method, RunConfig, TaskConfig};
use crate::system::{build_system, region};

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_NODES: usize = 512;
pub const DEFAULT_MODES: usize = 32;

/// One output file, held in memory until the whole command has succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// All requested certifications passed.
    pub passed: bool,
    pub summary: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    passed: bool,
    result: T,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    log: &'a dyn Fn(&str),
}

impl Ctx<'_> {
    fn task(&self) -> &TaskConfig {
        &self.cfg.task
    }

    fn json<T: Serialize>(&self, passed: bool, result: T) -> Result<Artifact> {
        let env = Envelope { schema_version: SCHEMA_VERSION, command: self.task().command.name(), seed: self.task().seed, passed, result };
        Ok(Artifact { name: format!("{}.json", self.task().command.name()), contents: serde_json::to_string_pretty(&env)? + "\n" })
    }

    fn csv(&self, contents: String) -> Artifact {
        Artifact { name: format!("{}.csv", self.task().command.name()), contents }
    }

    fn emit<T: Serialize>(&self, passed: bool, result: T, csv: impl FnOnce() -> Result<String>) -> Result<Artifact> {
        match self.cfg.output.format {
            Format::Json => self.json(passed, result),
            Format::Csv => Ok(self.csv(csv()?)),
        }
    }
}

fn vector(v: &Option<Vec<f64>>, key: &str) -> Result<DVector<f64>> {
    v.as_ref().map(|x| DVector::from_column_slice(x)).ok_or_else(|| anyhow!("task.{key} missing"))
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn energy(t: &TaskConfig) -> Result<f64> {
    t.k.ok_or_else(|| anyhow!("task.k missing"))
}

/// Dispatch the configured command. Nothing is written here; the caller owns
/// output.
pub fn run(cfg: &RunConfig, log: &dyn Fn(&str)) -> Result<Outcome> {
    let ctx = Ctx { cfg, log };
    let sys = build_system(&cfg.system, cfg.task.k).context("building the magnetic system")?;
    log(&format!("system {} (dimension {})", sys.name(), sys.dimension()));
    match cfg.task.command {
        Command::Integrate => run_integrate(&ctx, &sys),
        Command::Curvature => run_curvature(&ctx, &sys),
        Command::ScanK0 => run_scan(&ctx, &sys),
        Command::TheoremB => run_theorem_b(&ctx, &sys),
        Command::FindOrbit => run_find_orbit(&ctx, &sys),
        Command::Index => run_index(&ctx, &sys),
        Command::Transport => run_transport(&ctx, &sys),
        Command::BonnetMyers => run_bonnet_myers(&ctx, &sys),
        Command::ManeBound => run_mane(&ctx, &sys),
        Command::Report => run_report(&ctx, &sys),
    }
}

fn run_integrate(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let state = PhaseState { x: vector(&t.x0, "x0")?, v: vector(&t.v0, "v0")? };
    let t_end = t.t_end.ok_or_else(|| anyhow!("task.t_end missing"))?;
    let count = t.samples.unwrap_or(200);
    let orbit = integrate(sys, &state, t_end, &IntegrateOptions::uniform(t.tolerance, t_end, count))?;
    let summary = orbit.summary();
    let line = format!("integrated to t = {t_end}: energy drift {:.3e}, closure {:.3e}", summary.energy_drift, summary.closure_residual);
    let art = ctx.emit(true, &summary, || Ok(orbit.to_csv()?))?;
    Ok(Outcome { artifacts: vec![art], passed: true, summary: line })
}

fn run_curvature(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let k = energy(t)?;
    let n = sys.dimension();
    let points = halton_points(&region(&ctx.cfg.system, t)?, t.samples.unwrap_or(DEFAULT_SAMPLES), t.seed)?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate().filter(|(_, x)| sys.in_domain(x)) {
        let p = PointGeometry::at(sys, x)?;
        let mut rng = seeded_rng(t.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
        let v = random_unit(&p, &mut rng)?;
        let w = random_unit_orthogonal(&p, &v, &mut rng)?;
        rows.push(CurvatureSample::evaluate(sys, x, &v, Some(&w), k)?);
    }
    if rows.is_empty() {
        return Err(anyhow!("no sample point lies in the chart domain"));
    }
    let sec = rows.iter().filter_map(|r| r.sec);
    let (lo, hi) = sec.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
    let line = format!("{} samples at k = {k}: sec in [{lo:.12}, {hi:.12}]", rows.len());
    (ctx.log)(&line);
    let art = ctx.emit(true, &rows, || {
        let mut header: Vec<String> = numbered("x", n).chain(numbered("v", n)).chain(numbered("w", n)).collect();
        header.extend(["k", "sec", "ric", "trace_a"].map(String::from));
        let mut out = vec![header];
        for r in &rows {
            let mut rec: Vec<String> = r.x.iter().chain(&r.v).chain(r.w.iter().flatten()).map(f64::to_string).collect();
            rec.extend([r.k, r.sec.unwrap_or(f64::NAN), r.ric, r.trace_a].map(|v| v.to_string()));
            out.push(rec);
        }
        csv_string(out)
    })?;
    Ok(Outcome { artifacts: vec![art], passed: true, summary: line })
}

fn run_scan(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let grid = t.k_grid.as_deref().ok_or_else(|| anyhow!("task.k_grid missing"))?;
    let report = positivity_scan(sys, &region(&ctx.cfg.system, t)?, grid, t.samples.unwrap_or(DEFAULT_SAMPLES), t.seed)?;
    let line = format!("positivity holds up to k0(sec) = {:?}, k0(ric) = {:?} on the sampled region", report.k0_sec, report.k0_ric);
    let art = ctx.emit(true, &report, || Ok(report.to_csv()?))?;
    Ok(Outcome { artifacts: vec![art], passed: true, summary: line })
}

fn run_theorem_b(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let k0 = energy(t)?;
    let report = theorem_b_scan(sys, &region(&ctx.cfg.system, t)?, k0, t.per_axis.unwrap_or(64), t.energies.unwrap_or(16))?;
    // An inconsistency with the dichotomy is a resolution warning, not a failed check.
    let passed = true;
    let line = format!(
        "min sec {:.6e} below k0 = {k0}; b nowhere zero: {}, b identically zero: {}",
        report.min_sec, report.b_nowhere_zero, report.b_identically_zero
    );
    let art = ctx.emit(passed, &report, || {
        csv_string(vec![
            ["k0", "min_sec", "argmin_k", "positivity_holds", "b_nowhere_zero", "b_identically_zero", "zero_points"].map(String::from).to_vec(),
            vec![
                report.k0.to_string(),
                report.min_sec.to_string(),
                report.argmin_k.to_string(),
                report.positivity_holds.to_string(),
                report.b_nowhere_zero.to_string(),
                report.b_identically_zero.to_string(),
                report.zero_set.len().to_string(),
            ],
        ])
    })?;
    Ok(Outcome { artifacts: vec![art], passed, summary: line })
}

fn shoot_options(t: &TaskConfig, with_index: bool) -> ShootOptions {
    let record = RecordOptions {
        nodes: t.nodes.unwrap_or(DEFAULT_NODES),
        modes: Some(t.modes.unwrap_or(DEFAULT_MODES)),
        frame: t.frame.unwrap_or(IndexFrame::Coordinate),
        tolerance: t.tolerance,
    };
    let record = if with_index { record } else { record.without_index() };
    ShootOptions { tolerance: t.tolerance, record, ..ShootOptions::default() }
}

fn search(ctx: &Ctx, sys: &ChartedSystem, k: f64) -> Result<SearchOutcome> {
    let t = ctx.task();
    let x0 = vector(&t.x0, "x0")?;
    let period = t.period.ok_or_else(|| anyhow!("task.period missing"))?;
    let opts = shoot_options(t, true);
    (ctx.log)(&format!("searching at k = {k} from x0 = {:?}", x0.as_slice()));
    Ok(match t.method.unwrap_or(Method::Shoot) {
        Method::Shoot => {
            let v0 = vector(&t.v0, "v0")?;
            let c = Connection::at(sys, &x0)?;
            let norm = c.norm(&v0);
            if norm.is_nan() || norm <= 0.0 {
                return Err(anyhow!("task.v0 must be nonzero"));
            }
            let seed = PhaseState { x: x0, v: v0 * ((2.0 * k).sqrt() / norm) };
            shoot(sys, k, &seed, period, &opts)?
        }
        Method::Gradient => {
            let radius = t.radius.ok_or_else(|| anyhow!("task.radius missing"))?;
            let initial = DiscreteLoop::circle(x0.as_slice(), radius, period, opts.record.nodes, false)?;
            gradient_search(sys, k, &initial, &GradientSchedule { shoot: opts, ..GradientSchedule::default() })?
        }
    })
}

#[derive(Serialize)]
struct CertifiedOrbit<'a> {
    record: &'a OrbitRecord,
    certification: Certification,
}

#[derive(Serialize)]
struct OrbitFamily<'a> {
    orbits: Vec<CertifiedOrbit<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<SearchFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated: Option<String>,
}

/// Search at the first energy, then continue through the remaining grid points.
fn family(ctx: &Ctx, sys: &ChartedSystem) -> Result<(Vec<OrbitRecord>, Option<SearchFailure>, Option<String>)> {
    let t = ctx.task();
    let grid: Vec<f64> = match (&t.k_grid, t.k) {
        (Some(g), Some(k)) => std::iter::once(k).chain(g.iter().copied()).collect(),
        (Some(g), None) => g.clone(),
        (None, Some(k)) => vec![k],
        (None, None) => return Err(anyhow!("task.k missing")),
    };
    let Some((&k_first, rest)) = grid.split_first() else {
        return Ok((Vec::new(), None, None));
    };
    let start = match search(ctx, sys, k_first)? {
        SearchOutcome::Found(r) => *r,
        SearchOutcome::NotFound(f) => return Ok((Vec::new(), Some(f), None)),
    };
    if rest.is_empty() {
        return Ok((vec![start], None, None));
    }
    let opts = ContinuationOptions { shoot: shoot_options(t, true), ..ContinuationOptions::default() };
    let fam = continue_in_k(sys, &start, rest, &opts)?;
    let mut records = vec![start];
    records.extend(fam.records);
    Ok((records, None, fam.truncated))
}

fn certify_all<'a>(sys: &ChartedSystem, records: &'a [OrbitRecord]) -> Result<Vec<CertifiedOrbit<'a>>> {
    records.iter().map(|record| Ok(CertifiedOrbit { record, certification: certify(sys, record)? })).collect()
}

fn orbit_outcome(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let (records, failure, truncated) = family(ctx, sys)?;
    let orbits = certify_all(sys, &records)?;
    let checks: Vec<bool> = orbits.iter().map(|o| o.certification.passed && o.record.is_certified()).collect();
    let passed = failure.is_none() && truncated.is_none() && !checks.is_empty() && checks.iter().all(|&c| c);
    let summary = match &failure {
        Some(f) => f.message.clone(),
        None => orbits
            .iter()
            .map(|o| {
                format!(
                    "k = {}: T = {:.12}, index {}, certification {}",
                    o.record.k,
                    o.record.period,
                    o.certification.index,
                    if o.certification.passed { "passed" } else { "failed" }
                )
            })
            .chain(truncated.clone())
            .collect::<Vec<_>>()
            .join("\n"),
    };
    let art = ctx.emit(passed, OrbitFamily { orbits, failure, truncated }, || Ok(records_csv(&records, &checks)?))?;
    Ok(Outcome { artifacts: vec![art], passed, summary })
}

fn run_find_orbit(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    orbit_outcome(ctx, sys)
}

fn run_report(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    orbit_outcome(ctx, sys)
}

fn run_bonnet_myers(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let k = energy(ctx.task())?;
    let record = match search(ctx, sys, k)? {
        SearchOutcome::Found(r) => *r,
        SearchOutcome::NotFound(f) => {
            let art = ctx.emit(false, &f, || csv_string(vec![vec!["message".into()], vec![f.message.clone()]]))?;
            return Ok(Outcome { artifacts: vec![art], passed: false, summary: f.message.clone() });
        }
    };
    let cert = certify(sys, &record)?;
    let bm = cert.check("bonnet_myers").cloned();
    let passed = cert.passed;
    let summary = bm.map_or_else(|| "bonnet-myers: no record".into(), |c| format!("bonnet-myers {}: {}", if c.passed { "pass" } else { "fail" }, c.detail));
    let art = ctx.emit(passed, &cert, || Ok(records_csv(std::slice::from_ref(&record), &[passed])?))?;
    Ok(Outcome { artifacts: vec![art], passed, summary })
}

fn run_index(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let k = energy(t)?;
    let record = match search(ctx, sys, k)? {
        SearchOutcome::Found(r) => *r,
        SearchOutcome::NotFound(f) => {
            let art = ctx.emit(false, &f, || csv_string(vec![vec!["message".into()], vec![f.message.clone()]]))?;
            return Ok(Outcome { artifacts: vec![art], passed: false, summary: f.message.clone() });
        }
    };
    let mut artifacts = Vec::new();
    let report = if t.export_hessian.unwrap_or(false) {
        let options = IndexOptions::new(t.modes.unwrap_or(DEFAULT_MODES)).with_frame(t.frame.unwrap_or(IndexFrame::Coordinate));
        let (report, problem) = morse_index_with_problem(sys, &record.discrete, k, &options)?;
        artifacts.push(Artifact { name: "index_problem.json".into(), contents: problem.to_json()? + "\n" });
        report
    } else {
        record.index.clone().ok_or_else(|| anyhow!("orbit record carries no index"))?
    };
    let summary = format!(
        "index {} ({} negative, {} near zero, {} positive; m = {}, N = {})",
        report.index(),
        report.negative,
        report.near_zero,
        report.positive,
        report.mode_count,
        report.nodes
    );
    artifacts.insert(0, ctx.emit(true, &report, || Ok(report.spectrum_csv()?))?);
    Ok(Outcome { artifacts, passed: true, summary })
}

#[derive(Serialize)]
struct TransportSummary {
    t_end: f64,
    samples: usize,
    initial: Vec<f64>,
    end: Vec<f64>,
    /// `max |‖W(t)‖ − ‖W(0)‖|`.
    norm_drift: f64,
    /// `max |⟨W(t), γ̇(t)⟩ − ⟨W(0), γ̇(0)⟩|`.
    velocity_angle_drift: f64,
}

fn run_transport(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let state = PhaseState { x: vector(&t.x0, "x0")?, v: vector(&t.v0, "v0")? };
    let w0 = vector(&t.w0, "w0")?;
    let t_end = t.t_end.ok_or_else(|| anyhow!("task.t_end missing"))?;
    let count = t.samples.unwrap_or(200);
    let orbit = integrate(sys, &state, t_end, &IntegrateOptions::uniform(t.tolerance, t_end, count))?;
    let result = magnetic_transport(sys, &orbit, &w0, t.tolerance)?;
    let n = sys.dimension();
    let mut rows = vec![std::iter::once("t".to_string()).chain(numbered("w", n)).chain(["norm".into(), "velocity_inner".into()]).collect::<Vec<_>>()];
    let (mut norm_drift, mut angle_drift) = (0.0f64, 0.0f64);
    let mut first: Option<(f64, f64)> = None;
    for ((time, w), s) in result.times.iter().zip(&result.fields).zip(&orbit.samples) {
        let c = Connection::at(sys, &s.x_unwrapped)?;
        let (norm, inner) = (c.norm(w), c.inner(w, &s.v));
        let (n0, i0) = *first.get_or_insert((norm, inner));
        norm_drift = norm_drift.max((norm - n0).abs());
        angle_drift = angle_drift.max((inner - i0).abs());
        let mut rec = vec![time.to_string()];
        rec.extend(w.iter().map(f64::to_string));
        rec.extend([norm.to_string(), inner.to_string()]);
        rows.push(rec);
    }
    let summary = TransportSummary {
        t_end,
        samples: result.times.len(),
        initial: w0.as_slice().to_vec(),
        end: result.end.as_slice().to_vec(),
        norm_drift,
        velocity_angle_drift: angle_drift,
    };
    let line = format!("transport to t = {t_end}: norm drift {norm_drift:.3e}, velocity pairing drift {angle_drift:.3e}");
    let art = ctx.emit(true, &summary, || csv_string(rows))?;
    Ok(Outcome { artifacts: vec![art], passed: true, summary: line })
}

fn run_mane(ctx: &Ctx, sys: &ChartedSystem) -> Result<Outcome> {
    let t = ctx.task();
    let report = mane_upper_bound(sys, &region(&ctx.cfg.system, t)?, t.samples.unwrap_or(2000), t.seed)?;
    let line = report.message.clone();
    let art = ctx.emit(true, &report, || {
        let mut rows = vec![["scale", "sup_norm", "samples"].map(String::from).to_vec()];
        rows.extend(report.scales.iter().map(|s| vec![s.scale.to_string(), s.sup_norm.to_string(), s.samples.to_string()]));
        csv_string(rows)
    })?;
    Ok(Outcome { artifacts: vec![art], passed: true, summary: line })
}
