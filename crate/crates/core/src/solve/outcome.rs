use serde::Serialize;

use super::record::OrbitRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The periodicity system has no usable Newton direction.
    Degenerate,
    MaxIterations,
    /// The period fell below the floor: the loop is shrinking toward a constant.
    PeriodCollapse,
    /// Steps fell below the floor without reaching the gate.
    Vanishing,
    Integration,
    /// No interior maximum on the dilation string in either orientation, and descent stalled.
    NoMountainPass,
    /// The search converged but the orbit failed certification.
    Uncertified,
}

/// Why a search did not return an orbit. A failed search says nothing about
/// existence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchFailure {
    pub kind: FailureKind,
    pub message: String,
    pub iterations: usize,
    pub last_residual: f64,
    /// Period after each iteration.
    pub period_trace: Vec<f64>,
}

impl SearchFailure {
    pub fn new(kind: FailureKind, detail: impl Into<String>, iterations: usize, last_residual: f64, period_trace: Vec<f64>) -> Self {
        let detail = detail.into();
        Self { kind, message: format!("closed orbit not found: {detail}"), iterations, last_residual, period_trace }
    }
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Found(Box<OrbitRecord>),
    NotFound(SearchFailure),
}

impl SearchOutcome {
    pub fn found(&self) -> Option<&OrbitRecord> {
        match self {
            SearchOutcome::Found(r) => Some(r),
            SearchOutcome::NotFound(_) => None,
        }
    }

    pub fn into_record(self) -> Option<OrbitRecord> {
        match self {
            SearchOutcome::Found(r) => Some(*r),
            SearchOutcome::NotFound(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&SearchFailure> {
        match self {
            SearchOutcome::Found(_) => None,
            SearchOutcome::NotFound(f) => Some(f),
        }
    }
}
