//! Magnetic geodesic flows on coordinate charts: magnetic curvature, closed
//! orbits, the free-period action form and its Morse index.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod geom;
pub mod loopspace;
pub mod magcurv;
pub mod solve;

pub use error::{Error, Result};
pub use nalgebra;
pub use geom::{builtins, ChartedSystem, Connection, Coords, DerivativeScheme, PointGeometry};

/// Version tag written into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
