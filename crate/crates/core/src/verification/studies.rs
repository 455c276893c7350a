use std::time::Instant;

use rayon::prelude::*;

use super::convergence::{ConvergenceReport, ConvergenceRow};
use super::manufactured::{regularized_cavity, taylor_green, ExactAt, ManufacturedSolution, Physics, RegularizedCavity};
use crate::discretization::{build_knot_mesh, build_spline_taylor_hood, build_taylor_hood, build_tri_mesh, MixedSpace};
use crate::error::{Error, Result};
use crate::forms::{error_norm_terms, FlowParameters, NormTerms, NormWeights};
use crate::navier_stokes::{
    run_unsteady, solve_ns_steady, steady_jacobian, BoundaryCondition, NonlinearConfig, NsProblem, StepRecord, SubscaleModel,
    TimeStepConfig,
};
use crate::linalg::SparseSystem;
use crate::oseen::{assemble_oseen, solve_oseen, OseenProblem, OseenStabilization};
use crate::solution::{discrete_divergence_residual, MixedSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementFamily {
    /// Continuous `P_k / P_{k-1}` on two triangles per square cell.
    LagrangeTaylorHood,
    /// B-splines of degree `k / k-1` on one knot mesh, both `C^{k-2}`.
    SplineTaylorHood,
}

impl ElementFamily {
    pub fn id(self) -> &'static str {
        match self {
            ElementFamily::LagrangeTaylorHood => "lagrange-th",
            ElementFamily::SplineTaylorHood => "spline-th",
        }
    }
}

impl std::str::FromStr for ElementFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagrange-th" => Ok(ElementFamily::LagrangeTaylorHood),
            "spline-th" => Ok(ElementFamily::SplineTaylorHood),
            _ => Err(Error::InvalidInput(format!("unknown element family {s:?}"))),
        }
    }
}

/// Mixed space on an `n x n` partition of the box `origin + [0, extent]`.
pub fn build_space(family: ElementFamily, k: usize, n: usize, origin: [f64; 2], extent: [f64; 2]) -> Result<MixedSpace> {
    match family {
        ElementFamily::LagrangeTaylorHood => build_taylor_hood(build_tri_mesh(n, origin, extent)?, k),
        ElementFamily::SplineTaylorHood => build_spline_taylor_hood(build_knot_mesh(n, k, origin, extent)?, k),
    }
}

/// Unit lid speed, unit length, advection at 30 degrees.
pub fn cavity_advection() -> [f64; 2] {
    [3f64.sqrt() / 2.0, 0.5]
}

/// `nu = |a| L / (2 Pe)` with `|a| = L = 1`.
pub fn nu_from_peclet(pe: f64) -> f64 {
    0.5 / pe
}

/// One solved discretization with its errors.
#[derive(Debug, Clone)]
pub struct SolvedCase {
    pub space: MixedSpace,
    pub solution: MixedSolution,
    pub errors: NormTerms,
    pub divergence_residual: f64,
    pub wall_s: f64,
    /// Nonlinear iterations (summed over time steps); zero for linear problems.
    pub iterations: usize,
    /// Per-step diagnostics of unsteady runs.
    pub steps: Vec<StepRecord>,
}

impl SolvedCase {
    pub fn row(&self) -> ConvergenceRow {
        ConvergenceRow {
            n: self.space.mesh().n_per_side(),
            h: self.space.mesh().h(),
            ndof: self.solution.n_dofs(),
            err_h1_u: self.errors.h1_u,
            err_l2_p: self.errors.l2_p,
            err_triple: self.errors.triple,
            wall_s: self.wall_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OseenCaseConfig {
    pub family: ElementFamily,
    pub k: usize,
    pub n: usize,
    pub nu: f64,
    pub c_inv: f64,
    pub stabilization: OseenStabilization,
}

/// Runs `f` on the Oseen cavity problem described by `cfg`.
fn with_oseen_cavity<T>(cfg: &OseenCaseConfig, f: impl FnOnce(&OseenProblem<'_>, &RegularizedCavity) -> Result<T>) -> Result<T> {
    let exact = regularized_cavity()?;
    let space = build_space(cfg.family, cfg.k, cfg.n, exact.origin(), exact.extent())?;
    let params = FlowParameters::new(cfg.nu, cavity_advection(), cfg.c_inv, 1.0)?;
    let physics = Physics::Oseen { a: params.a, nu: params.nu };
    let source = |x: [f64; 2]| exact.source(x, 0.0, physics);
    let boundary = |x: [f64; 2]| exact.velocity(x, 0.0);
    let problem = OseenProblem {
        space: &space,
        params,
        source: &source,
        boundary: &boundary,
        stabilization: cfg.stabilization,
    };
    f(&problem, &exact)
}

pub fn solve_oseen_cavity(cfg: &OseenCaseConfig) -> Result<SolvedCase> {
    let start = Instant::now();
    with_oseen_cavity(cfg, |problem, exact| {
        let space = problem.space;
        let solution = solve_oseen(problem)?;
        let weights = NormWeights::Oseen(problem.params);
        let errors = error_norm_terms(space, &solution.coefficients, &ExactAt::new(exact, 0.0), weights)?;
        let divergence_residual = discrete_divergence_residual(space, &solution)?;
        let wall_s = start.elapsed().as_secs_f64();
        Ok(SolvedCase { space: space.clone(), solution, errors, divergence_residual, wall_s, iterations: 0, steps: Vec::new() })
    })
}

/// Constrained linear system that `solve_oseen_cavity` solves.
pub fn oseen_cavity_system(cfg: &OseenCaseConfig) -> Result<SparseSystem> {
    with_oseen_cavity(cfg, |problem, _| assemble_oseen(problem))
}

/// `nu = |u_lid| L / Re` with unit lid speed and length.
pub fn nu_from_reynolds(re: f64) -> f64 {
    1.0 / re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsCavityConfig {
    pub family: ElementFamily,
    pub k: usize,
    pub n: usize,
    pub nu: f64,
    pub c_inv: f64,
    pub nonlinear: NonlinearConfig,
}

/// Runs `f` on the steady cavity problem described by `cfg`.
fn with_ns_cavity<T>(cfg: &NsCavityConfig, f: impl FnOnce(&NsProblem<'_>, &RegularizedCavity) -> Result<T>) -> Result<T> {
    let exact = regularized_cavity()?;
    let space = build_space(cfg.family, cfg.k, cfg.n, exact.origin(), exact.extent())?;
    let physics = Physics::NavierStokes { nu: cfg.nu };
    let source = |x: [f64; 2], t: f64| exact.source(x, t, physics);
    let wall = |x: [f64; 2], t: f64| exact.velocity(x, t);
    let mut problem = NsProblem::new(&space, cfg.nu, &source, [BoundaryCondition::Dirichlet(&wall); 4])?;
    problem.c_inv = cfg.c_inv;
    f(&problem, &exact)
}

/// Steady Navier-Stokes on the regularized cavity with the exact velocity
/// imposed on all four walls.
pub fn solve_ns_cavity(cfg: &NsCavityConfig) -> Result<SolvedCase> {
    let start = Instant::now();
    with_ns_cavity(cfg, |problem, exact| {
        let space = problem.space;
        let steady = solve_ns_steady(problem, &cfg.nonlinear, None)?;
        let weights = NormWeights::NavierStokes { nu: cfg.nu, c_inv: cfg.c_inv };
        let errors = error_norm_terms(space, &steady.solution.coefficients, &ExactAt::new(exact, 0.0), weights)?;
        let divergence_residual = discrete_divergence_residual(space, &steady.solution)?;
        Ok(SolvedCase {
            space: space.clone(),
            solution: steady.solution,
            errors,
            divergence_residual,
            wall_s: start.elapsed().as_secs_f64(),
            iterations: steady.log.len().saturating_sub(1),
            steps: Vec::new(),
        })
    })
}

/// Newton matrix of the steady cavity at `state` (e.g. a converged solution).
pub fn ns_cavity_jacobian(cfg: &NsCavityConfig, state: &MixedSolution) -> Result<SparseSystem> {
    with_ns_cavity(cfg, |problem, _| steady_jacobian(problem, state))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorGreenConfig {
    pub family: ElementFamily,
    pub k: usize,
    pub n: usize,
    pub nu: f64,
    pub c_inv: f64,
    pub subscales: SubscaleModel,
    /// Largest time step as a multiple of `h`; the step is shrunk so that
    /// an integer number of steps reaches `t_final`.
    pub dt_ratio: f64,
    pub t_final: f64,
    pub nonlinear: NonlinearConfig,
}

/// Taylor-Green vortex on `[-pi, pi]^2` with free-slip walls, started from
/// the projected exact velocity. Velocity errors are taken at `t_final`,
/// pressure errors at the last midpoint `t_final - dt/2`.
pub fn solve_taylor_green(cfg: &TaylorGreenConfig) -> Result<SolvedCase> {
    let start = Instant::now();
    let exact = taylor_green(cfg.nu)?;
    let space = build_space(cfg.family, cfg.k, cfg.n, exact.origin(), exact.extent())?;
    let physics = Physics::NavierStokes { nu: cfg.nu };
    let source = |x: [f64; 2], t: f64| exact.source(x, t, physics);
    let u0 = |x: [f64; 2]| exact.velocity(x, 0.0);
    let mut problem = NsProblem::new(&space, cfg.nu, &source, [BoundaryCondition::FreeSlip; 4])?;
    problem.c_inv = cfg.c_inv;
    problem.subscales = cfg.subscales;
    problem.initial_velocity = Some(&u0);
    let time = TimeStepConfig::covering(cfg.t_final, cfg.dt_ratio * space.mesh().h(), cfg.nonlinear)?;
    let run = run_unsteady(&problem, &time)?;
    let at = ExactAt { solution: &exact, velocity_time: time.t_final, pressure_time: time.t_final - 0.5 * time.dt };
    let weights = NormWeights::NavierStokes { nu: cfg.nu, c_inv: cfg.c_inv };
    let errors = error_norm_terms(&space, &run.solution.coefficients, &at, weights)?;
    let divergence_residual = run.steps.iter().map(|s| s.divergence_residual).fold(0.0, f64::max);
    Ok(SolvedCase {
        space,
        solution: run.solution,
        errors,
        divergence_residual,
        wall_s: start.elapsed().as_secs_f64(),
        iterations: run.steps.iter().map(|s| s.iterations).sum(),
        steps: run.steps,
    })
}

/// Solves `solve(n)` for each mesh, with up to `jobs` meshes concurrently,
/// and collects the rows in mesh order. On failure the rows of the meshes
/// before the failing one are returned with the error.
pub fn run_study<F>(
    label: &str,
    meshes: &[usize],
    jobs: usize,
    solve: F,
) -> std::result::Result<(ConvergenceReport, Vec<SolvedCase>), (ConvergenceReport, Error)>
where
    F: Fn(usize) -> Result<SolvedCase> + Sync,
{
    let mut report = ConvergenceReport::new(label);
    let mut sorted = meshes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let results: Vec<Result<SolvedCase>> = if jobs > 1 {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(p) => p,
            Err(e) => return Err((report, Error::Configuration(e.to_string()))),
        };
        pool.install(|| sorted.par_iter().map(|&n| solve(n)).collect())
    } else {
        sorted.iter().map(|&n| solve(n)).collect()
    };
    let mut cases = Vec::new();
    for r in results {
        match r {
            Ok(c) => {
                if let Err(e) = report.push(c.row()) {
                    return Err((report, e));
                }
                cases.push(c);
            }
            Err(e) => return Err((report, e)),
        }
    }
    Ok((report, cases))
}

/// Row of a Peclet sweep: stabilized and Galerkin errors on the same mesh.
#[derive(Debug, Clone)]
pub struct PeSweepRow {
    pub pe: f64,
    pub nu: f64,
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub stabilized: NormTerms,
    /// `Err` holds the failure message of a Galerkin solve (e.g. a singular
    /// or inaccurate factorization at extreme Pe).
    pub galerkin: std::result::Result<NormTerms, String>,
    /// Discrete incompressibility residual of the stabilized solution.
    pub divergence_residual: f64,
    pub wall_s: f64,
}

pub const PE_SWEEP_HEADER: &str = "pe,nu,n,h,ndof,err_h1_u_stab,err_l2_p_stab,err_triple_stab,err_h1_u_gal,err_l2_p_gal,err_triple_gal,status_gal,wall_s";

#[derive(Debug, Clone, Default)]
pub struct PeSweepReport {
    pub rows: Vec<PeSweepRow>,
}

impl PeSweepReport {
    pub fn to_csv(&self) -> String {
        use super::convergence::fmt_float as f;
        let mut s = String::from(PE_SWEEP_HEADER);
        s.push('\n');
        for r in &self.rows {
            let (g, status) = match &r.galerkin {
                Ok(g) => ([f(g.h1_u), f(g.l2_p), f(g.triple)], "ok".to_string()),
                Err(msg) => (
                    ["nan".to_string(), "nan".to_string(), "nan".to_string()],
                    format!("failed: {}", msg.replace([',', '\n'], ";")),
                ),
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                f(r.pe),
                f(r.nu),
                r.n,
                f(r.h),
                r.ndof,
                f(r.stabilized.h1_u),
                f(r.stabilized.l2_p),
                f(r.stabilized.triple),
                g[0],
                g[1],
                g[2],
                status,
                f(r.wall_s)
            ));
        }
        s
    }

    pub fn stabilized_h1(&self, pe: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.pe == pe).map(|r| r.stabilized.h1_u)
    }

    pub fn galerkin_h1(&self, pe: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.pe == pe).and_then(|r| r.galerkin.as_ref().ok().map(|g| g.h1_u))
    }
}

/// Oseen cavity over a list of Peclet numbers on one mesh, stabilized and
/// Galerkin. Galerkin failures are recorded per row.
pub fn run_pe_sweep(family: ElementFamily, k: usize, n: usize, pes: &[f64], c_inv: f64, jobs: usize) -> Result<PeSweepReport> {
    let one = |pe: f64| -> Result<PeSweepRow> {
        let start = Instant::now();
        let nu = nu_from_peclet(pe);
        let base = OseenCaseConfig { family, k, n, nu, c_inv, stabilization: OseenStabilization::Sharp };
        let stab = solve_oseen_cavity(&base)?;
        let gal = solve_oseen_cavity(&OseenCaseConfig { stabilization: OseenStabilization::Off, ..base })
            .map(|c| c.errors)
            .map_err(|e| e.to_string());
        Ok(PeSweepRow {
            pe,
            nu,
            n,
            h: stab.space.mesh().h(),
            ndof: stab.solution.n_dofs(),
            stabilized: stab.errors,
            galerkin: gal,
            divergence_residual: stab.divergence_residual,
            wall_s: start.elapsed().as_secs_f64(),
        })
    };
    let rows: Vec<Result<PeSweepRow>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Configuration(e.to_string()))?;
        pool.install(|| pes.par_iter().map(|&pe| one(pe)).collect())
    } else {
        pes.iter().map(|&pe| one(pe)).collect()
    };
    Ok(PeSweepReport { rows: rows.into_iter().collect::<Result<_>>()? })
}
