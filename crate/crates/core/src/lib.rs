pub mod assembly;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod multigrid;
pub mod smoothers;
pub mod spline;
pub mod verify;

pub use error::{Error, Result};

/// Relative residual reduction used by every reported iteration count.
pub const DEFAULT_REL_TOL: f64 = 1e-8;
