//! Steady Oseen driver for the reduced three-field formulation.

use std::sync::Arc;

use crate::discretization::{MixedSpace, Side};
use crate::error::Result;
use crate::forms::{element_oseen, FlowParameters, OseenKernel, SourceFn};
use crate::linalg::{assemble, ConstraintSet, DirectSolver, SparseSystem, SparsityPattern};
use crate::solution::{constrain_velocity_side, pressure_constraints, MixedSolution};

pub type VectorFn<'a> = dyn Fn([f64; 2]) -> [f64; 2] + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OseenStabilization {
    /// Sharp `tau_M`, `tau_C` from the constant advection.
    Sharp,
    /// Plain Galerkin Taylor-Hood (`tau = 0`, `p~` pinned to zero).
    Off,
}

pub struct OseenProblem<'a> {
    pub space: &'a MixedSpace,
    pub params: FlowParameters,
    pub source: &'a SourceFn<'a>,
    /// Velocity prescribed on the whole boundary.
    pub boundary: &'a VectorFn<'a>,
    pub stabilization: OseenStabilization,
}

/// Assembled and constrained linear system of an Oseen problem.
pub fn assemble_oseen(problem: &OseenProblem<'_>) -> Result<SparseSystem> {
    let space = problem.space;
    let stabilized = problem.stabilization == OseenStabilization::Sharp;
    let kernel = OseenKernel::new(space, problem.params, stabilized, problem.source);
    let pattern = Arc::new(SparsityPattern::for_mixed(space));
    let mut system = assemble(&pattern, space.n_elements(), || kernel.scratch(), |s, e, out| {
        element_oseen(&kernel, s, e, out)
    })?;
    system.layout = Some(space.layout());
    let mut constraints = ConstraintSet::new();
    for side in Side::ALL {
        constrain_velocity_side(space, side, &[0, 1], problem.boundary, &mut constraints)?;
    }
    pressure_constraints(space, !stabilized, &mut constraints)?;
    constraints.apply(&mut system, None)?;
    Ok(system)
}

pub fn solve_oseen(problem: &OseenProblem<'_>) -> Result<MixedSolution> {
    let system = assemble_oseen(problem)?;
    let x = DirectSolver::default().solve(&system)?;
    MixedSolution::from_vec(problem.space.layout(), x)
}
