//! Magnetic curvature operators `A^Ω`, `R^Ω_k`, `M^Ω_k`, their sectional and
//! Ricci functions, and sampled positivity scans.

pub mod operators;
pub mod scan;

pub use operators::{
    a_omega, curvature_operator_matrix, m_omega_k, min_sec_omega_k, r_omega_k, ric_omega_k, ric_omega_k_trace,
    ric_with_basis, rotation_j, sec_omega_k, surface_data, surface_sec_b, trace_a_omega, CurvatureSample, SurfaceData,
};
pub use scan::{positivity_scan, theorem_b_scan, ScanReport, ScanRow, TheoremBReport};
