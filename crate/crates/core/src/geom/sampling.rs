use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::frames::{gram_schmidt, orthonormal_complement};
use super::tensor::Connection;
use crate::error::{Error, Result};

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Axis-aligned box of chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("sample box bounds must have equal nonzero length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput("sample box needs finite lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(center: &[f64], half_width: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points with a seeded Cranley–Patterson rotation.
pub fn halton_points(region: &SampleBox, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let n = region.dim();
    if n > PRIMES.len() {
        return Err(Error::InvalidInput(format!("halton sampling supports up to {} dimensions", PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    Ok((0..count)
        .map(|idx| {
            DVector::from_fn(n, |d, _| {
                let u = (radical_inverse(idx as u64 + 1, PRIMES[d]) + shift[d]).fract();
                region.lower[d] + u * (region.upper[d] - region.lower[d])
            })
        })
        .collect())
}

/// Uniformly distributed g-unit vector at the point of `c`.
pub fn random_unit<R: Rng>(c: &Connection, rng: &mut R) -> Result<DVector<f64>> {
    let n = c.dim();
    let coord: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let frame = gram_schmidt(c, &coord)?;
    unit_in_span(&frame, rng)
}

/// Uniformly distributed g-unit vector in `{v}^⊥`.
pub fn random_unit_orthogonal<R: Rng>(c: &Connection, v: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let frame = orthonormal_complement(c, v)?;
    unit_in_span(&frame, rng)
}

fn unit_in_span<R: Rng>(frame: &[DVector<f64>], rng: &mut R) -> Result<DVector<f64>> {
    loop {
        let z: Vec<f64> = frame.iter().map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            let mut out = DVector::zeros(frame[0].len());
            for (zi, e) in z.iter().zip(frame) {
                out += e * (zi / norm);
            }
            return Ok(out);
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::builtins;

    #[test]
    fn halton_is_deterministic_and_in_box() {
        let b = SampleBox::new(vec![0.0, -1.0], vec![1.0, 3.0]).unwrap();
        let a = halton_points(&b, 100, 7).unwrap();
        assert_eq!(a, halton_points(&b, 100, 7).unwrap());
        assert_ne!(a, halton_points(&b, 100, 8).unwrap());
        assert!(a.iter().all(|p| p[0] >= 0.0 && p[0] < 1.0 && p[1] >= -1.0 && p[1] < 3.0));
    }

    #[test]
    fn random_units_have_unit_length() {
        let sys = builtins::round_sphere(0.0);
        let c = Connection::at(&sys, &DVector::from_vec(vec![0.5, 1.2])).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let v = random_unit(&c, &mut rng).unwrap();
            assert!((c.norm(&v) - 1.0).abs() < 1e-14);
            let w = random_unit_orthogonal(&c, &v, &mut rng).unwrap();
            assert!(c.inner(&v, &w).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_boxes_are_rejected() {
        assert!(SampleBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(SampleBox::new(vec![], vec![]).is_err());
    }
}
