//! Residual-based variational multiscale solver for 2D incompressible flow
//! with discretely divergence-free subscales.

pub mod discretization;
pub mod error;
pub mod forms;
pub mod linalg;
pub mod navier_stokes;
pub mod oseen;
mod solution;
pub mod verification;

pub use error::{Error, Result};
pub use solution::{discrete_divergence_residual, MixedSolution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
