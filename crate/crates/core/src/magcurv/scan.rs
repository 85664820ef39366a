use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{surface_data, SplitCurvature};
use crate::error::{Error, Result};
use crate::geom::sampling::{halton_points, random_unit, random_unit_orthogonal, seeded_rng, SampleBox};
use crate::geom::{ChartedSystem, PointGeometry};

/// Absolute guard for declaring a sampled minimum positive.
pub const POSITIVITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: f64,
    pub min_sec: f64,
    pub min_ric: f64,
    pub argmin_sec: Vec<f64>,
    pub argmin_ric: Vec<f64>,
}

/// Sampled minima of `Sec^Ω_k` and `Ric^Ω_k` over an energy grid.
///
/// Minima are taken over finitely many samples and so only bound the true
/// infimum from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub schema_version: u32,
    pub rows: Vec<ScanRow>,
    /// Largest grid energy such that every smaller grid energy has positive sampled min Sec.
    pub k0_sec: Option<f64>,
    pub k0_ric: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

fn prefix_threshold(rows: &[ScanRow], value: impl Fn(&ScanRow) -> f64) -> Option<f64> {
    rows.iter().take_while(|r| value(r) > POSITIVITY_GUARD).last().map(|r| r.k)
}

impl ScanReport {
    pub fn to_csv(&self) -> Result<String> {
        let n = self.rows.first().map_or(0, |r| r.argmin_sec.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["k".to_string(), "min_sec".into(), "min_ric".into()];
        header.extend((1..=n).map(|i| format!("argmin_sec_x{i}")));
        header.extend((1..=n).map(|i| format!("argmin_ric_x{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.k.to_string(), r.min_sec.to_string(), r.min_ric.to_string()];
            rec.extend(r.argmin_sec.iter().map(f64::to_string));
            rec.extend(r.argmin_ric.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn validate_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::InvalidInput("empty energy grid".into()));
    }
    if k_grid.iter().any(|k| !(*k > 0.0) || !k.is_finite()) || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("energy grid must be strictly increasing and positive".into()));
    }
    Ok(())
}

/// Seeded minima scan over `region`. Points come from a shifted Halton
/// sequence; directions are uniform in g-orthonormal frames. Each sample has
/// its own RNG stream so the result does not depend on thread scheduling.
pub fn positivity_scan(
    sys: &ChartedSystem,
    region: &SampleBox,
    k_grid: &[f64],
    sample_budget: usize,
    seed: u64,
) -> Result<ScanReport> {
    validate_grid(k_grid)?;
    if sample_budget == 0 {
        return Err(Error::InvalidInput("sample budget must be positive".into()));
    }
    if region.dim() != sys.dimension() {
        return Err(Error::Dimension { expected: sys.dimension(), got: region.dim() });
    }
    let points = halton_points(region, sample_budget, seed)?;
    let splits: Vec<Option<(DVector<f64>, SplitCurvature)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            if !sys.in_domain(x) {
                return Ok(None);
            }
            let p = PointGeometry::at(sys, x)?;
            let mut rng = seeded_rng(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            let v = random_unit(&p, &mut rng)?;
            let w = random_unit_orthogonal(&p, &v, &mut rng)?;
            Ok(Some((x.clone(), SplitCurvature::at(&p, &v, &w)?)))
        })
        .collect::<Result<_>>()?;
    let splits: Vec<_> = splits.into_iter().flatten().collect();
    if splits.is_empty() {
        return Err(Error::InvalidInput("no sample point lies in the chart domain".into()));
    }

    let rows: Vec<ScanRow> = k_grid
        .iter()
        .map(|&k| {
            let (mut ms, mut mr) = (f64::INFINITY, f64::INFINITY);
            let (mut as_, mut ar) = (&splits[0].0, &splits[0].0);
            for (x, s) in &splits {
                let (sv, rv) = (s.sec(k), s.ric(k));
                if sv < ms {
                    ms = sv;
                    as_ = x;
                }
                if rv < mr {
                    mr = rv;
                    ar = x;
                }
            }
            ScanRow {
                k,
                min_sec: ms,
                min_ric: mr,
                argmin_sec: as_.as_slice().to_vec(),
                argmin_ric: ar.as_slice().to_vec(),
            }
        })
        .collect();

    Ok(ScanReport {
        schema_version: crate::SCHEMA_VERSION,
        k0_sec: prefix_threshold(&rows, |r| r.min_sec),
        k0_ric: prefix_threshold(&rows, |r| r.min_ric),
        rows,
        samples: splits.len(),
        seed,
    })
}

/// Result of probing the surface dichotomy numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBReport {
    pub schema_version: u32,
    pub k0: f64,
    pub grid_points: usize,
    pub energies: Vec<f64>,
    /// Sampled minimum of `Sec^b_k` over grid points, directions and energies.
    pub min_sec: f64,
    pub argmin_x: Vec<f64>,
    pub argmin_k: f64,
    pub positivity_holds: bool,
    /// Grid points where `|b| ≤ zero_tol`.
    pub zero_set: Vec<Vec<f64>>,
    pub zero_tol: f64,
    pub b_nowhere_zero: bool,
    pub b_identically_zero: bool,
    pub warning: Option<String>,
}

/// Evaluate `min_v Sec^b_k = 2kK + b² − √(2k)|db|` on a tensor grid of
/// `per_axis²` points of `region` and `energy_count` energies in `(0, k0)`.
///
/// Positivity together with a sign-changing `b` is reported as a resolution
/// warning: it cannot happen for the continuous problem.
pub fn theorem_b_scan(
    sys: &ChartedSystem,
    region: &SampleBox,
    k0: f64,
    per_axis: usize,
    energy_count: usize,
) -> Result<TheoremBReport> {
    if sys.dimension() != 2 {
        return Err(Error::InvalidInput("theorem-b scan needs a surface".into()));
    }
    if !(k0 > 0.0) || per_axis < 2 || energy_count == 0 {
        return Err(Error::InvalidInput("theorem-b scan needs k0 > 0, at least 2 points per axis and 1 energy".into()));
    }
    let zero_tol = 1e-12;
    let energies: Vec<f64> = (1..=energy_count).map(|j| k0 * j as f64 / (energy_count + 1) as f64).collect();
    let grid: Vec<DVector<f64>> = (0..per_axis * per_axis)
        .map(|idx| {
            let (i, j) = (idx / per_axis, idx % per_axis);
            let t = |m: usize, d: usize| region.lower[d] + (region.upper[d] - region.lower[d]) * m as f64 / per_axis as f64;
            DVector::from_vec(vec![t(i, 0), t(j, 1)])
        })
        .filter(|x| sys.in_domain(x))
        .collect();
    let data: Vec<_> = grid
        .par_iter()
        .map(|x| {
            let s = surface_data(sys, x)?;
            let g = crate::geom::Connection::at(sys, x)?;
            Ok((s.gauss, s.b, g.covector_norm(&s.db)))
        })
        .collect::<Result<_>>()?;

    let mut min_sec = f64::INFINITY;
    let (mut argmin_x, mut argmin_k) = (vec![], energies[0]);
    for (x, &(gauss, b, dbn)) in grid.iter().zip(&data) {
        for &k in &energies {
            let s = 2.0 * k * gauss + b * b - (2.0 * k).sqrt() * dbn;
            if s < min_sec {
                min_sec = s;
                argmin_x = x.as_slice().to_vec();
                argmin_k = k;
            }
        }
    }
    let zero_set: Vec<Vec<f64>> = grid
        .iter()
        .zip(&data)
        .filter(|(_, d)| d.1.abs() <= zero_tol)
        .map(|(x, _)| x.as_slice().to_vec())
        .collect();
    let positivity_holds = min_sec > POSITIVITY_GUARD;
    let b_nowhere_zero = zero_set.is_empty();
    let b_identically_zero = zero_set.len() == grid.len();
    let warning = (positivity_holds && !b_nowhere_zero && !b_identically_zero).then(|| {
        "positivity sampled while b has both zeros and nonzeros; grid or energy resolution is too coarse".to_string()
    });
    Ok(TheoremBReport {
        schema_version: crate::SCHEMA_VERSION,
        k0,
        grid_points: grid.len(),
        energies,
        min_sec,
        argmin_x,
        argmin_k,
        positivity_holds,
        zero_set,
        zero_tol,
        b_nowhere_zero,
        b_identically_zero,
        warning,
    })
}
