use nalgebra::DVector;

use super::outcome::SearchOutcome;
use super::record::OrbitRecord;
use super::shoot::{shoot, ShootOptions};
use crate::error::{Error, Result};
use crate::flow::PhaseState;
use crate::geom::{ChartedSystem, Connection};

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub shoot: ShootOptions,
    /// Largest step in `√k` between corrector solves.
    pub max_sqrt_step: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { shoot: ShootOptions::default(), max_sqrt_step: 0.1 }
    }
}

/// Records found along the grid, in grid order. `truncated` explains where and
/// why the family stopped early.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub records: Vec<OrbitRecord>,
    pub truncated: Option<String>,
}

#[derive(Debug, Clone)]
struct Point {
    q: f64,
    x: DVector<f64>,
    u: DVector<f64>,
    period: f64,
}

impl Point {
    fn from_record(r: &OrbitRecord) -> Self {
        let speed = (2.0 * r.k).sqrt();
        Self {
            q: r.k.sqrt(),
            x: DVector::from_column_slice(&r.initial_x),
            u: DVector::from_column_slice(&r.initial_v) / speed,
            period: r.period,
        }
    }
}

fn predict(history: &[Point], q: f64) -> Point {
    let last = &history[history.len() - 1];
    if history.len() < 2 || (last.q - history[history.len() - 2].q).abs() < 1e-14 {
        return Point { q, ..last.clone() };
    }
    let prev = &history[history.len() - 2];
    let s = (q - last.q) / (last.q - prev.q);
    Point {
        q,
        x: &last.x + (&last.x - &prev.x) * s,
        u: &last.u + (&last.u - &prev.u) * s,
        period: last.period + (last.period - prev.period) * s,
    }
}

/// Follow a certified orbit through `k_grid` with secant predictor in `√k`
/// and [`shoot`] as corrector. Intermediate substeps skip the index; grid
/// points get full records.
pub fn continue_in_k(sys: &ChartedSystem, start: &OrbitRecord, k_grid: &[f64], options: &ContinuationOptions) -> Result<Continuation> {
    if !start.is_certified() {
        return Err(Error::InvalidInput("continuation needs a certified starting record".into()));
    }
    if k_grid.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidInput("energies must be positive".into()));
    }
    if !(options.max_sqrt_step > 0.0) {
        return Err(Error::InvalidInput("continuation step must be positive".into()));
    }
    let mut history = vec![Point::from_record(start)];
    let mut records = Vec::with_capacity(k_grid.len());
    let light = ShootOptions { record: options.shoot.record.without_index(), ..options.shoot.clone() };
    for &k in k_grid {
        let q_target = k.sqrt();
        let q_now = history.last().unwrap().q;
        let steps = (((q_target - q_now).abs() / options.max_sqrt_step).ceil() as usize).max(1);
        for s in 1..=steps {
            let q = q_now + (q_target - q_now) * s as f64 / steps as f64;
            let kq = if s == steps { k } else { q * q };
            let guess = predict(&history, q);
            let c = Connection::at(sys, &guess.x)?;
            let norm = c.norm(&guess.u);
            let seed = PhaseState { x: guess.x.clone(), v: &guess.u * ((2.0 * kq).sqrt() / norm) };
            let opts = if s == steps { &options.shoot } else { &light };
            match shoot(sys, kq, &seed, guess.period, opts)? {
                SearchOutcome::Found(r) => {
                    history.push(Point::from_record(&r));
                    if history.len() > 2 {
                        history.remove(0);
                    }
                    if s == steps {
                        records.push(*r);
                    }
                }
                SearchOutcome::NotFound(f) => {
                    let note = format!("fold or turning point suspected near k = {kq:.6}: corrector failed after predictor ({})", f.message);
                    return Ok(Continuation { records, truncated: Some(note) });
                }
            }
        }
    }
    Ok(Continuation { records, truncated: None })
}
