//! Manufactured solutions, convergence studies and rate fitting.

mod convergence;
mod manufactured;
mod studies;

pub use convergence::{fit_rate, fmt_float, ConvergenceReport, ConvergenceRow, ErrorColumn, RateBand, CSV_HEADER};
pub use manufactured::{
    operator_residual, regularized_cavity, self_check, taylor_green, ExactAt, ManufacturedSolution, Physics,
    RegularizedCavity, TaylorGreen, SELF_CHECK_TOLERANCE,
};
pub use studies::{
    build_space, cavity_advection, ns_cavity_jacobian, nu_from_peclet, nu_from_reynolds, oseen_cavity_system, run_pe_sweep,
    run_study, solve_ns_cavity, solve_oseen_cavity, solve_taylor_green, ElementFamily, NsCavityConfig, OseenCaseConfig, PeSweepReport,
    PeSweepRow, SolvedCase, TaylorGreenConfig, PE_SWEEP_HEADER,
};
