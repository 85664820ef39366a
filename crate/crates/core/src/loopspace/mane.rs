use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::sampling::{halton_points, SampleBox};
use crate::geom::{ChartedSystem, Connection};
use crate::SCHEMA_VERSION;

/// Region scale factors for the growth check.
pub const NESTED_SCALES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Growth ratio between the largest and smallest region that counts as
/// evidence of an unbounded primitive.
pub const GROWTH_RATIO: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSup {
    pub scale: f64,
    pub sup_norm: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManeReport {
    pub schema_version: u32,
    /// `½ (sup |θ|_g)²` over the base region.
    pub bound: f64,
    pub sup_norm: f64,
    pub scales: Vec<ScaleSup>,
    pub unbounded_evidence: bool,
    pub message: String,
}

/// Sampled upper bound for the Mañé critical value from
/// `½|γ̇|² + k + θ(γ̇) ≥ k − ½|θ|²`.
///
/// Points outside the system's domain are skipped. The region is also scaled
/// about its centre by [`NESTED_SCALES`]; a strictly growing sup is reported as
/// evidence that no bounded primitive exists on this chart.
pub fn mane_upper_bound(sys: &ChartedSystem, region: &SampleBox, samples: usize, seed: u64) -> Result<ManeReport> {
    if !sys.has_primitive() {
        return Err(Error::NoPrimitive);
    }
    if region.dim() != sys.dimension() {
        return Err(Error::Dimension { expected: sys.dimension(), got: region.dim() });
    }
    let center: Vec<f64> = region.lower.iter().zip(&region.upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut scales = Vec::with_capacity(NESTED_SCALES.len());
    for &scale in &NESTED_SCALES {
        let lower = center.iter().zip(&region.lower).map(|(c, l)| c + scale * (l - c)).collect();
        let upper = center.iter().zip(&region.upper).map(|(c, u)| c + scale * (u - c)).collect();
        let sub = SampleBox::new(lower, upper)?;
        let mut sup: f64 = 0.0;
        let mut used = 0;
        for x in halton_points(&sub, samples, seed)? {
            if !sys.in_domain(&x) {
                continue;
            }
            let c = Connection::at(sys, &x)?;
            let theta = sys.primitive_at(&x)?.ok_or(Error::NoPrimitive)?;
            sup = sup.max(c.covector_norm(&theta));
            used += 1;
        }
        if used == 0 {
            return Err(Error::InvalidInput(format!("no sample of the region scaled by {scale} lies in the domain")));
        }
        scales.push(ScaleSup { scale, sup_norm: sup, samples: used });
    }
    let sups: Vec<f64> = scales.iter().map(|s| s.sup_norm).collect();
    let increasing = sups.windows(2).all(|w| w[1] > w[0]);
    let unbounded_evidence = increasing && sups[sups.len() - 1] >= GROWTH_RATIO * sups[0];
    let sup_norm = sups[0];
    let message = if unbounded_evidence {
        "unbounded primitive evidence; c = +inf plausible".to_string()
    } else {
        format!("bounded on sampled regions; c <= {:.6}", 0.5 * sup_norm * sup_norm)
    };
    Ok(ManeReport { schema_version: SCHEMA_VERSION, bound: 0.5 * sup_norm * sup_norm, sup_norm, scales, unbounded_evidence, message })
}
