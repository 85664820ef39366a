//! Free-period loop space: discrete loops, the action form `η_k`, its Hessian,
//! Morse index and the Mañé critical value bound.

pub mod action;
pub mod discrete;
pub mod hessian;
pub mod index;
pub mod mane;
pub mod variations;

pub use action::{action, action_terms, critical_gate, eta_k, eta_residual, require_critical, ActionTerms, EtaResidual, Variation};
pub use discrete::{chart_system, node_geometry, DiscreteLoop, LoopKinematics};
pub use hessian::{hessian_form, hessian_form_curvature, HessianContext};
pub use variations::{
    coordinate_frame, make_test_variation, sine_mode_variation, sine_profile, transported_frame, FrameField, SineMode,
};
pub use index::{morse_index, morse_index_with_problem, IndexFrame, IndexOptions, IndexProblem, IndexReport};
pub use mane::{mane_upper_bound, ManeReport, ScaleSup};
