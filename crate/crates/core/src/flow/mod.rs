//! Magnetic geodesic flow and magnetic parallel transport.

pub mod dop853;
pub mod orbit;
pub mod transport;

pub use orbit::{integrate, magnetic_ode_rhs, IntegrateOptions, IntegratorMeta, Orbit, OrbitSample, OrbitSummary, PhaseState};
pub use transport::{magnetic_transport, omega_tilde, TransportResult};
