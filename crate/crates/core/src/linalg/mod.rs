//! Global sparse systems: pattern, assembly, constraints and direct solves.

pub mod constraints;
pub mod market;
pub mod solve;
pub mod sparse;

pub use constraints::{ConstraintSet, MeanConstraint};
pub use market::write_matrix_market;
pub use solve::{scaled_residual, solve_direct, DirectSolver};
pub use sparse::{assemble, scatter, ElementContribution, SparseSystem, SparsityPattern};
