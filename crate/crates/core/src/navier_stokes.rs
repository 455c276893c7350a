//! Steady and unsteady Navier-Stokes drivers on the three-field
//! `(u_h, p_h, p~)` formulation.
//!
//! Every nonlinear iteration assembles the exact residual together with a
//! Jacobian (Picard for the first iterations, exact Newton afterwards) and
//! solves for a correction. The subscales are condensed pointwise inside the
//! element kernel, so each iteration uses subscales consistent with the
//! current coarse iterate.

use std::sync::Arc;

use crate::discretization::{MixedSpace, QuadraturePurpose, Side, Tabulation, Tabulator};
use crate::error::{Error, Result};
use crate::forms::{element_ns, subscale_samples, NsKernel, NsMode, TimeSourceFn, DEFAULT_C_INV};
use crate::linalg::{assemble, ConstraintSet, DirectSolver, SparseSystem, SparsityPattern};
use crate::oseen::VectorFn;
use crate::solution::{constrain_velocity_side, pressure_constraints, MixedSolution};

pub type TimeVectorFn<'a> = dyn Fn([f64; 2], f64) -> [f64; 2] + Sync + 'a;

#[derive(Clone, Copy)]
pub enum BoundaryCondition<'a> {
    /// Both velocity components prescribed.
    Dirichlet(&'a TimeVectorFn<'a>),
    /// Zero normal velocity, zero tangential traction.
    FreeSlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubscaleModel {
    /// Subscales carried in time at the quadrature points.
    Dynamic,
    /// `u' = -tau_M (grad p' + r_M)` from the current iterate.
    QuasiStatic,
}

impl std::str::FromStr for SubscaleModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(SubscaleModel::Dynamic),
            "quasistatic" | "quasi-static" => Ok(SubscaleModel::QuasiStatic),
            _ => Err(Error::InvalidInput(format!("unknown subscale model {s:?}"))),
        }
    }
}

pub struct NsProblem<'a> {
    pub space: &'a MixedSpace,
    pub nu: f64,
    pub c_inv: f64,
    pub source: &'a TimeSourceFn<'a>,
    /// Initial velocity for unsteady runs.
    pub initial_velocity: Option<&'a VectorFn<'a>>,
    /// Indexed by [`Side::index`].
    pub boundary: [BoundaryCondition<'a>; 4],
    pub subscales: SubscaleModel,
    /// Drop every stabilization and subscale term.
    pub galerkin: bool,
}

impl<'a> NsProblem<'a> {
    pub fn new(
        space: &'a MixedSpace,
        nu: f64,
        source: &'a TimeSourceFn<'a>,
        boundary: [BoundaryCondition<'a>; 4],
    ) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self {
            space,
            nu,
            c_inv: DEFAULT_C_INV,
            source,
            initial_velocity: None,
            boundary,
            subscales: SubscaleModel::QuasiStatic,
            galerkin: false,
        })
    }

    /// Strong velocity constraints at time `t` plus the pressure means.
    /// Dirichlet sides go first so that corners shared with a free-slip side
    /// keep the Dirichlet data.
    fn constraints(&self, t: f64) -> Result<ConstraintSet> {
        let mut set = ConstraintSet::new();
        for side in Side::ALL {
            if let BoundaryCondition::Dirichlet(g) = self.boundary[side.index()] {
                constrain_velocity_side(self.space, side, &[0, 1], &|x| g(x, t), &mut set)?;
            }
        }
        for side in Side::ALL {
            if let BoundaryCondition::FreeSlip = self.boundary[side.index()] {
                constrain_velocity_side(self.space, side, &[side.normal_component()], &|_| [0.0; 2], &mut set)?;
            }
        }
        pressure_constraints(self.space, self.galerkin, &mut set)?;
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearConfig {
    /// Stop once the residual drops below `rel_tol` times the first one.
    pub rel_tol: f64,
    /// Or below this absolute value.
    pub abs_tol: f64,
    pub max_iterations: usize,
    /// Picard iterations before switching to Newton.
    pub picard_iterations: usize,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-13, max_iterations: 30, picard_iterations: 2 }
    }
}

impl NonlinearConfig {
    /// Newton from the first iteration; the previous step is a good enough
    /// start for time stepping.
    pub fn unsteady() -> Self {
        Self { picard_iterations: 0, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepConfig {
    pub dt: f64,
    pub t_final: f64,
    pub nonlinear: NonlinearConfig,
}

impl TimeStepConfig {
    /// Requires `dt > 0`, `t_final >= dt` and an integer number of steps.
    pub fn new(dt: f64, t_final: f64, nonlinear: NonlinearConfig) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        if !(t_final >= dt) {
            return Err(Error::InvalidInput(format!("final time {t_final} is shorter than one step {dt}")));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidInput(format!("final time {t_final} is not a multiple of dt = {dt}")));
        }
        Ok(Self { dt, t_final, nonlinear })
    }

    /// Largest uniform step not exceeding `max_dt` that lands on `t_final`.
    pub fn covering(t_final: f64, max_dt: f64, nonlinear: NonlinearConfig) -> Result<Self> {
        if !(max_dt > 0.0 && t_final > 0.0) {
            return Err(Error::InvalidInput(format!("need positive times, got T = {t_final}, dt = {max_dt}")));
        }
        let steps = (t_final / max_dt * (1.0 - 1e-12)).ceil().max(1.0);
        Self::new(t_final / steps, t_final, nonlinear)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub newton: bool,
    /// Euclidean norm of the constrained residual before the update.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub solution: MixedSolution,
    pub log: Vec<IterationRecord>,
}

/// `u'` at every assembly quadrature point after step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubscaleState {
    pub samples: Vec<[f64; 2]>,
    pub step: usize,
}

impl SubscaleState {
    pub fn zeros(space: &MixedSpace) -> Self {
        let nq = space.quadrature_for(QuadraturePurpose::Assembly).len();
        Self { samples: vec![[0.0; 2]; space.n_elements() * nq], step: 0 }
    }
}

/// Reusable pieces of a run on one space.
pub struct NsWorkspace {
    pattern: Arc<SparsityPattern>,
    solver: DirectSolver,
}

impl NsWorkspace {
    pub fn new(space: &MixedSpace) -> Self {
        Self { pattern: Arc::new(SparsityPattern::for_mixed(space)), solver: DirectSolver::reusing() }
    }
}

struct StepData<'a> {
    mode: NsMode,
    source_time: f64,
    previous: Option<&'a [f64]>,
    fine_old: Option<&'a [[f64; 2]]>,
}

fn kernel<'a>(problem: &'a NsProblem<'a>, data: &StepData<'a>, x: &'a [f64]) -> Result<NsKernel<'a>> {
    let mut k = NsKernel::new(
        problem.space,
        problem.nu,
        problem.c_inv,
        data.mode,
        problem.source,
        data.source_time,
        x,
        data.previous,
        data.fine_old,
    )?;
    k.galerkin = problem.galerkin;
    Ok(k)
}

/// Constrained Newton system `J dx = -R(x)` at `x`.
fn linearized_system(
    problem: &NsProblem<'_>,
    data: &StepData<'_>,
    ws: &NsWorkspace,
    constraints: &ConstraintSet,
    x: &[f64],
    newton: bool,
) -> Result<SparseSystem> {
    let mut k = kernel(problem, data, x)?;
    k.newton = newton;
    let mut system =
        assemble(&ws.pattern, problem.space.n_elements(), || k.scratch(), |s, e, out| element_ns(&k, s, e, out))?;
    system.layout = Some(problem.space.layout());
    constraints.apply(&mut system, Some(x))?;
    Ok(system)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn solve_nonlinear(
    problem: &NsProblem<'_>,
    data: &StepData<'_>,
    ws: &mut NsWorkspace,
    constraints: &ConstraintSet,
    x: &mut [f64],
    cfg: &NonlinearConfig,
) -> Result<Vec<IterationRecord>> {
    let mut log = Vec::new();
    let mut first = None;
    for it in 0..=cfg.max_iterations {
        let newton = it >= cfg.picard_iterations;
        let system = linearized_system(problem, data, ws, constraints, x, newton)?;
        let r = norm2(&system.rhs);
        if !r.is_finite() {
            return Err(Error::Nonconvergence {
                iterations: it,
                history: log.iter().map(|l: &IterationRecord| l.residual).chain([r]).collect(),
            });
        }
        log.push(IterationRecord { iteration: it, newton, residual: r });
        let r0 = *first.get_or_insert(r);
        if r <= cfg.abs_tol || r <= cfg.rel_tol * r0 {
            return Ok(log);
        }
        if it == cfg.max_iterations {
            break;
        }
        let dx = ws.solver.solve(&system)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Err(Error::Nonconvergence { iterations: cfg.max_iterations, history: log.iter().map(|l| l.residual).collect() })
}

/// Steady problem with quasi-static subscales and the smoothed `tau`,
/// started from `initial` (zero if absent).
pub fn solve_ns_steady(
    problem: &NsProblem<'_>,
    config: &NonlinearConfig,
    initial: Option<&MixedSolution>,
) -> Result<SteadySolution> {
    let layout = problem.space.layout();
    let mut x = match initial {
        Some(s) if s.layout == layout => s.coefficients.clone(),
        Some(_) => return Err(Error::DimensionMismatch("initial guess does not belong to this space".into())),
        None => vec![0.0; layout.total()],
    };
    let constraints = problem.constraints(0.0)?;
    let mut ws = NsWorkspace::new(problem.space);
    let data = StepData { mode: NsMode::Steady, source_time: 0.0, previous: None, fine_old: None };
    let log = solve_nonlinear(problem, &data, &mut ws, &constraints, &mut x, config)?;
    Ok(SteadySolution { solution: MixedSolution::from_vec(layout, x)?, log })
}

/// Constrained Newton matrix of the steady problem at `state`; the
/// right-hand side is the negated residual there.
pub fn steady_jacobian(problem: &NsProblem<'_>, state: &MixedSolution) -> Result<SparseSystem> {
    check_state(problem, state)?;
    let constraints = problem.constraints(0.0)?;
    let ws = NsWorkspace::new(problem.space);
    let data = StepData { mode: NsMode::Steady, source_time: 0.0, previous: None, fine_old: None };
    linearized_system(problem, &data, &ws, &constraints, &state.coefficients, true)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub solution: MixedSolution,
    /// Committed `u'_n` (dynamic subscales only).
    pub subscales: Option<SubscaleState>,
    pub log: Vec<IterationRecord>,
}

fn check_state(problem: &NsProblem<'_>, state: &MixedSolution) -> Result<()> {
    if state.layout != problem.space.layout() {
        return Err(Error::DimensionMismatch("state does not belong to this space".into()));
    }
    Ok(())
}

/// One implicit midpoint step from `t_prev` with dynamic subscales.
pub fn advance_midpoint(
    problem: &NsProblem<'_>,
    ws: &mut NsWorkspace,
    state: &MixedSolution,
    t_prev: f64,
    subscales: &SubscaleState,
    config: &TimeStepConfig,
) -> Result<StepOutcome> {
    check_state(problem, state)?;
    let dt = config.dt;
    let data = StepData {
        mode: NsMode::Dynamic { dt },
        source_time: t_prev + 0.5 * dt,
        previous: Some(&state.coefficients),
        fine_old: Some(&subscales.samples),
    };
    let constraints = problem.constraints(t_prev + dt)?;
    let mut x = state.coefficients.clone();
    let log = solve_nonlinear(problem, &data, ws, &constraints, &mut x, &config.nonlinear)?;
    let samples = subscale_samples(&kernel(problem, &data, &x)?)?;
    Ok(StepOutcome {
        solution: MixedSolution::from_vec(state.layout, x)?,
        subscales: Some(SubscaleState { samples, step: subscales.step + 1 }),
        log,
    })
}

/// One implicit midpoint step from `t_prev` with quasi-static subscales.
pub fn advance_midpoint_quasistatic(
    problem: &NsProblem<'_>,
    ws: &mut NsWorkspace,
    state: &MixedSolution,
    t_prev: f64,
    config: &TimeStepConfig,
) -> Result<StepOutcome> {
    check_state(problem, state)?;
    let dt = config.dt;
    let data = StepData {
        mode: NsMode::QuasiStatic { dt },
        source_time: t_prev + 0.5 * dt,
        previous: Some(&state.coefficients),
        fine_old: None,
    };
    let constraints = problem.constraints(t_prev + dt)?;
    let mut x = state.coefficients.clone();
    let log = solve_nonlinear(problem, &data, ws, &constraints, &mut x, &config.nonlinear)?;
    Ok(StepOutcome { solution: MixedSolution::from_vec(state.layout, x)?, subscales: None, log })
}

/// Quasi-static subscales `u'` of a converged unsteady step, for energy
/// diagnostics.
pub fn quasistatic_subscales(
    problem: &NsProblem<'_>,
    state: &MixedSolution,
    previous: &MixedSolution,
    t_prev: f64,
    dt: f64,
) -> Result<Vec<[f64; 2]>> {
    let data = StepData {
        mode: NsMode::QuasiStatic { dt },
        source_time: t_prev + 0.5 * dt,
        previous: Some(&previous.coefficients),
        fine_old: None,
    };
    subscale_samples(&kernel(problem, &data, &state.coefficients)?)
}

/// Discretely divergence-free L2 projection of `u0` respecting the velocity
/// constraints at `t0`: `(u, v) - (p, div v) + (q, div u) = (u0, v)`.
pub fn project_initial_velocity(problem: &NsProblem<'_>, u0: &VectorFn<'_>, t0: f64) -> Result<MixedSolution> {
    let space = problem.space;
    let rule = space.quadrature_for(QuadraturePurpose::Assembly);
    let tv_ = Tabulator::new(&space.velocity, rule.clone());
    let tp_ = Tabulator::new(&space.pressure, rule);
    let pattern = Arc::new(SparsityPattern::for_mixed(space));
    let mut system = assemble(
        &pattern,
        space.n_elements(),
        || (Tabulation::default(), Tabulation::default()),
        |(tv, tp), e, out| {
            space.element_global_dofs(e, &mut out.dofs);
            out.reset(out.dofs.len());
            tv_.tabulate(e, tv)?;
            tp_.tabulate(e, tp)?;
            let (nv, np) = (tv.n_basis, tp.n_basis);
            for q in 0..tv.n_points {
                let w = tv.jxw[q];
                let g = u0(tv.points[q]);
                for a in 0..nv {
                    let na = tv.val(q, a);
                    let ga = tv.grad(q, a);
                    for c in 0..2 {
                        out.vector[c * nv + a] += w * g[c] * na;
                        for b in 0..nv {
                            *out.entry(c * nv + a, c * nv + b) += w * na * tv.val(q, b);
                        }
                        for m in 0..np {
                            let v = w * tp.val(q, m) * ga[c];
                            *out.entry(c * nv + a, 2 * nv + m) -= v;
                            *out.entry(2 * nv + m, c * nv + a) += v;
                        }
                    }
                }
            }
            Ok(())
        },
    )?;
    system.layout = Some(space.layout());
    let mut constraints = ConstraintSet::new();
    for side in Side::ALL {
        if let BoundaryCondition::Dirichlet(g) = problem.boundary[side.index()] {
            constrain_velocity_side(space, side, &[0, 1], &|x| g(x, t0), &mut constraints)?;
        }
    }
    for side in Side::ALL {
        if let BoundaryCondition::FreeSlip = problem.boundary[side.index()] {
            constrain_velocity_side(space, side, &[side.normal_component()], &|_| [0.0; 2], &mut constraints)?;
        }
    }
    pressure_constraints(space, true, &mut constraints)?;
    constraints.apply(&mut system, None)?;
    let mut x = DirectSolver::default().solve(&system)?;
    // the projection's pressure is a multiplier, not an initial pressure
    let l = space.layout();
    for d in 0..l.n_pressure {
        x[l.pressure(d)] = 0.0;
    }
    x[l.pressure_multiplier()] = 0.0;
    MixedSolution::from_vec(l, x)
}

/// Kinetic energy split of a state with subscales sampled at the assembly
/// quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    /// `1/2 |u_h|^2`
    pub coarse: f64,
    /// `1/2 |u'|^2` by quadrature
    pub fine: f64,
    /// `1/2 |u_h + u'|^2`, the functional the dynamic-subscale scheme
    /// dissipates.
    pub total: f64,
}

impl Energy {
    /// `1/2 |u_h|^2 + 1/2 |u'|^2`
    pub fn split(&self) -> f64 {
        self.coarse + self.fine
    }
}

pub fn energy(space: &MixedSpace, solution: &MixedSolution, subscales: Option<&[[f64; 2]]>) -> Result<Energy> {
    let l = space.layout();
    if solution.layout != l {
        return Err(Error::DimensionMismatch("solution does not belong to this space".into()));
    }
    let rule = space.quadrature_for(QuadraturePurpose::Assembly);
    let nq = rule.len();
    if let Some(s) = subscales {
        if s.len() != nq * space.n_elements() {
            return Err(Error::DimensionMismatch(format!(
                "{} subscale samples for {} points",
                s.len(),
                nq * space.n_elements()
            )));
        }
    }
    let tab = Tabulator::new(&space.velocity, rule);
    let mut t = Tabulation::default();
    let x = &solution.coefficients;
    let mut e = Energy { coarse: 0.0, fine: 0.0, total: 0.0 };
    for el in 0..space.n_elements() {
        tab.tabulate(el, &mut t)?;
        let vd = space.velocity.element_dofs(el);
        for q in 0..nq {
            let mut u = [0.0; 2];
            for (a, &d) in vd.iter().enumerate() {
                let n = t.val(q, a);
                u[0] += x[l.velocity(0, d)] * n;
                u[1] += x[l.velocity(1, d)] * n;
            }
            let f = subscales.map_or([0.0; 2], |s| s[el * nq + q]);
            let w = 0.5 * t.jxw[q];
            e.coarse += w * (u[0] * u[0] + u[1] * u[1]);
            e.fine += w * (f[0] * f[0] + f[1] * f[1]);
            e.total += w * ((u[0] + f[0]).powi(2) + (u[1] + f[1]).powi(2));
        }
    }
    Ok(e)
}

/// Per-step diagnostics of an unsteady run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub energy: Energy,
    pub divergence_residual: f64,
    pub iterations: usize,
}

pub const STEP_CSV_HEADER: &str = "step,time,energy_coarse,energy_fine,energy_total,div_residual,iterations";

impl StepRecord {
    pub fn csv_row(&self) -> String {
        use crate::verification::fmt_float as f;
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            f(self.time),
            f(self.energy.coarse),
            f(self.energy.fine),
            f(self.energy.total),
            f(self.divergence_residual),
            self.iterations
        )
    }
}

#[derive(Debug, Clone)]
pub struct UnsteadyRun {
    pub solution: MixedSolution,
    pub subscales: Option<SubscaleState>,
    pub steps: Vec<StepRecord>,
}

/// Time loop from `t = 0` to `config.t_final`. The start state is the
/// projection of the problem's initial velocity (zero if absent) and zero
/// subscales. Step 0 in `steps` describes the start state.
pub fn run_unsteady(problem: &NsProblem<'_>, config: &TimeStepConfig) -> Result<UnsteadyRun> {
    let space = problem.space;
    let mut state = match problem.initial_velocity {
        Some(u0) => project_initial_velocity(problem, u0, 0.0)?,
        None => MixedSolution::zeros(space.layout()),
    };
    let mut subscales = match problem.subscales {
        SubscaleModel::Dynamic => Some(SubscaleState::zeros(space)),
        SubscaleModel::QuasiStatic => None,
    };
    let mut steps = vec![StepRecord {
        step: 0,
        time: 0.0,
        energy: energy(space, &state, subscales.as_ref().map(|s| s.samples.as_slice()))?,
        divergence_residual: crate::discrete_divergence_residual(space, &state)?,
        iterations: 0,
    }];
    let mut ws = NsWorkspace::new(space);
    for n in 0..config.n_steps() {
        let t_prev = n as f64 * config.dt;
        let outcome = match (&subscales, problem.subscales) {
            (Some(s), SubscaleModel::Dynamic) => advance_midpoint(problem, &mut ws, &state, t_prev, s, config)?,
            _ => advance_midpoint_quasistatic(problem, &mut ws, &state, t_prev, config)?,
        };
        let fine = match &outcome.subscales {
            Some(s) => s.samples.clone(),
            None => quasistatic_subscales(problem, &outcome.solution, &state, t_prev, config.dt)?,
        };
        steps.push(StepRecord {
            step: n + 1,
            time: (n + 1) as f64 * config.dt,
            energy: energy(space, &outcome.solution, Some(&fine))?,
            divergence_residual: crate::discrete_divergence_residual(space, &outcome.solution)?,
            iterations: outcome.log.len().saturating_sub(1),
        });
        state = outcome.solution;
        if outcome.subscales.is_some() {
            subscales = outcome.subscales;
        }
    }
    Ok(UnsteadyRun { solution: state, subscales, steps })
}
