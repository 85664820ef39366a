use serde::Serialize;

use super::record::OrbitRecord;
use crate::error::{Error, Result};
use crate::geom::ChartedSystem;
use crate::SCHEMA_VERSION;

/// Relative slack on `T ≤ rπ(m+1)`.
pub const BONNET_MYERS_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    /// Signed margin; nonnegative when the check holds.
    pub margin: f64,
    pub detail: String,
}

impl Check {
    fn skipped(name: &str, detail: String) -> Self {
        Self { name: name.into(), applicable: false, passed: true, margin: f64::NAN, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub schema_version: u32,
    pub k: f64,
    pub period: f64,
    pub index: usize,
    pub min_ric: f64,
    pub min_sec: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Certification {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bonnet–Myers period bound `rπ(m+1)` with `1/r² = min Ric`, if `min Ric > 0`.
pub fn bonnet_myers_bound(min_ric: f64, index: usize) -> Option<f64> {
    (min_ric > 0.0).then(|| std::f64::consts::PI * (index as f64 + 1.0) / min_ric.sqrt())
}

/// Run the period bound, the index lower bound and the contractibility check
/// on a record that carries an index.
pub fn certify(sys: &ChartedSystem, record: &OrbitRecord) -> Result<Certification> {
    let index = record.morse().ok_or(Error::MissingIndex)?;
    let mut checks = Vec::with_capacity(4);

    let f = &record.flags;
    checks.push(Check {
        name: "orbit".into(),
        applicable: true,
        passed: f.certified,
        margin: record.eta.gate - record.eta.norm,
        detail: format!(
            "energy {:.2e}, closure {:.2e}, eta {:.2e} (gate {:.2e})",
            record.energy_residual, record.closure_residual, record.eta.norm, record.eta.gate
        ),
    });

    checks.push(match bonnet_myers_bound(record.min_ric, index) {
        Some(bound) => {
            let passed = record.period <= bound * (1.0 + BONNET_MYERS_SLACK);
            Check {
                name: "bonnet_myers".into(),
                applicable: true,
                passed,
                margin: (bound - record.period) / bound,
                detail: format!("T = {:.9} vs r*pi*(m+1) = {:.9} (m = {index}, min Ric = {:.9})", record.period, bound, record.min_ric),
            }
        }
        None => Check::skipped("bonnet_myers", format!("min Ric = {:.3e} is not positive", record.min_ric)),
    });

    let even = sys.dimension().is_multiple_of(2);
    checks.push(if even && sys.is_orientable() && record.min_sec > 0.0 {
        Check {
            name: "synge".into(),
            applicable: true,
            passed: index >= 1,
            margin: index as f64 - 1.0,
            detail: format!("min Sec = {:.9} > 0, index {index}", record.min_sec),
        }
    } else {
        Check::skipped("synge", format!("needs even dimension, orientation and min Sec > 0 (min Sec = {:.3e})", record.min_sec))
    });

    checks.push(if sys.has_lattice() && record.contractible_expected {
        Check {
            name: "contractible".into(),
            applicable: true,
            passed: record.contractible,
            margin: if record.contractible { 0.0 } else { -1.0 },
            detail: format!("winding {:?}", record.winding),
        }
    } else {
        Check::skipped("contractible", "no lattice or no contractible target".into())
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(Certification {
        schema_version: SCHEMA_VERSION,
        k: record.k,
        period: record.period,
        index,
        min_ric: record.min_ric,
        min_sec: record.min_sec,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::PhaseState;
    use crate::geom::builtins;
    use crate::solve::record::RecordOptions;
    use crate::solve::shoot::{shoot, ShootOptions};

    fn options() -> ShootOptions {
        ShootOptions { record: RecordOptions { nodes: 128, modes: Some(4), ..RecordOptions::default() }, ..ShootOptions::default() }
    }

    #[test]
    fn torus_bound_is_attained() {
        let sys = builtins::flat_torus(1.0);
        let seed = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let r = shoot(&sys, 0.5, &seed, 6.0, &options()).unwrap().into_record().unwrap();
        let c = certify(&sys, &r).unwrap();
        assert!(c.passed);
        assert!(c.check("bonnet_myers").unwrap().margin.abs() < 1e-9);
    }

    #[test]
    fn inflated_period_fails() {
        let sys = builtins::flat_torus(1.0);
        let seed = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let mut r = shoot(&sys, 0.5, &seed, 6.0, &options()).unwrap().into_record().unwrap();
        r.period *= 1.5;
        let c = certify(&sys, &r).unwrap();
        assert!(!c.check("bonnet_myers").unwrap().passed);
        assert!(!c.passed);
    }

    #[test]
    fn sphere_synge() {
        let sys = builtins::round_sphere(0.0);
        let seed = PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let r = shoot(&sys, 0.5, &seed, 6.0, &options()).unwrap().into_record().unwrap();
        let c = certify(&sys, &r).unwrap();
        let s = c.check("synge").unwrap();
        assert!(s.applicable && s.passed);
        assert!((r.min_sec - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_index() {
        let sys = builtins::flat_torus(1.0);
        let seed = PhaseState::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let opts = ShootOptions { record: options().record.without_index(), ..options() };
        let r = shoot(&sys, 0.5, &seed, 6.0, &opts).unwrap().into_record().unwrap();
        assert!(matches!(certify(&sys, &r), Err(Error::MissingIndex)));
    }
}
