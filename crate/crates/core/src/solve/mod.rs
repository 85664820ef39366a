//! Closed-orbit search at fixed energy, continuation in `k` and certification
//! of found orbits.

pub mod certify;
pub mod continuation;
pub mod gradient;
pub mod outcome;
pub mod record;
pub mod shoot;

pub use outcome::{FailureKind, SearchFailure, SearchOutcome};
pub use record::{build_record, records_csv, OrbitRecord, RecordFlags, RecordOptions};
pub use shoot::{shoot, shoot_many, ShootOptions, WindingTarget};
pub use gradient::{gradient_search, GradientSchedule};
pub use certify::{bonnet_myers_bound, certify, Certification, Check};
pub use continuation::{continue_in_k, Continuation, ContinuationOptions};
