mod common;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmsflow::discretization::{MixedSpace, QuadraturePurpose, Side};
use vmsflow::forms::{element_ns, FlowParameters, NsKernel, NsMode};
use vmsflow::linalg::{assemble, SparseSystem, SparsityPattern};
use vmsflow::navier_stokes::*;
use vmsflow::verification::{
    build_space, solve_ns_cavity, solve_taylor_green, ElementFamily, NsCavityConfig, TaylorGreenConfig,
};
use vmsflow::{Error, MixedSolution};

use common::{cubic_flow, dense_galerkin, quadratic_flow, PolynomialFlow};

const FAMILIES: [(ElementFamily, usize); 2] = [(ElementFamily::LagrangeTaylorHood, 2), (ElementFamily::SplineTaylorHood, 3)];

fn ns_source(flow: &PolynomialFlow, nu: f64) -> impl Fn([f64; 2], f64) -> [f64; 2] + Sync + '_ {
    move |x, _| {
        let u = (flow.velocity)(x);
        let g = (flow.gradient)(x);
        let l = (flow.laplacian)(x);
        let gp = (flow.pressure_gradient)(x);
        std::array::from_fn(|c| u[0] * g[c][0] + u[1] * g[c][1] - nu * l[c] + gp[c])
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn steady_patch_error(family: ElementFamily, k: usize, flow: &PolynomialFlow, nu: f64) -> f64 {
    let space = build_space(family, k, 3, [0.0; 2], [1.0; 2]).unwrap();
    let source = ns_source(flow, nu);
    let wall = |x: [f64; 2], _t: f64| (flow.velocity)(x);
    let problem = NsProblem::new(&space, nu, &source, [BoundaryCondition::Dirichlet(&wall); 4]).unwrap();
    // converge to round-off; the default relative tolerance leaves ~1e-8
    let tight = NonlinearConfig { rel_tol: 1e-15, abs_tol: 1e-12, ..NonlinearConfig::default() };
    let sol = solve_ns_steady(&problem, &tight, None).unwrap().solution;
    let mut worst: f64 = 0.0;
    for c in 0..2 {
        let exact = space.velocity.interpolate(|x| (flow.velocity)(x)[c]).unwrap();
        worst = worst.max(max_diff(sol.velocity(c), &exact));
    }
    let p = space.pressure.interpolate(flow.pressure).unwrap();
    worst.max(max_diff(sol.pressure(), &p)).max(max_diff(sol.total_pressure(), &p))
}

/// The skew form equals the convective one only under exact integration,
/// so the flow degree is limited by the assembly rule (exact to 2k):
/// quadratic velocities keep `u . grad u . v` within it for k >= 2.
#[test]
fn steady_patch_test_reproduces_quadratic_flow() {
    for nu in [1.0, 1e-2] {
        for (family, k) in [
            (ElementFamily::LagrangeTaylorHood, 2),
            (ElementFamily::SplineTaylorHood, 2),
            (ElementFamily::SplineTaylorHood, 3),
        ] {
            let e = steady_patch_error(family, k, &quadratic_flow(), nu);
            assert!(e <= 1e-9, "{family:?} k={k}, nu = {nu}: {e:e}");
        }
    }
}

#[test]
fn cubic_flow_is_not_reproduced_under_the_assembly_rule() {
    // degree-8 convective integrand against a Gauss rule exact to degree 7
    let e = steady_patch_error(ElementFamily::SplineTaylorHood, 3, &cubic_flow(), 1.0);
    assert!(e > 1e-9 && e < 1e-4, "{e:e}");
}

#[test]
fn zero_data_steady_solution_is_zero() {
    for (family, k) in FAMILIES {
        let space = build_space(family, k, 4, [0.0; 2], [1.0; 2]).unwrap();
        let zero = |_: [f64; 2], _: f64| [0.0; 2];
        let problem = NsProblem::new(&space, 0.01, &zero, [BoundaryCondition::Dirichlet(&zero); 4]).unwrap();
        let s = solve_ns_steady(&problem, &NonlinearConfig::default(), None).unwrap();
        assert!(s.log.len() - 1 <= 2, "{} iterations", s.log.len() - 1);
        assert!(s.solution.coefficients.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn zero_data_unsteady_run_stays_zero() {
    let space = build_space(ElementFamily::SplineTaylorHood, 2, 4, [0.0; 2], [1.0; 2]).unwrap();
    let zero = |_: [f64; 2], _: f64| [0.0; 2];
    for model in [SubscaleModel::Dynamic, SubscaleModel::QuasiStatic] {
        let mut problem = NsProblem::new(&space, 0.01, &zero, [BoundaryCondition::Dirichlet(&zero); 4]).unwrap();
        problem.subscales = model;
        let run = run_unsteady(&problem, &TimeStepConfig::new(0.1, 0.3, NonlinearConfig::unsteady()).unwrap()).unwrap();
        assert!(run.solution.coefficients.iter().all(|v| *v == 0.0));
        assert!(run.steps.iter().all(|s| s.energy.total == 0.0 && s.divergence_residual == 0.0));
        if let Some(s) = run.subscales {
            assert_eq!(s.step, 3);
            assert!(s.samples.iter().all(|u| *u == [0.0; 2]));
        }
    }
}

fn assembled(space: &MixedSpace, pattern: &Arc<SparsityPattern>, mode: NsMode, x: &[f64], prev: &[f64], fine: &[[f64; 2]]) -> SparseSystem {
    let f = |p: [f64; 2], t: f64| [p[1].sin() + t, p[0] * p[0]];
    let k = NsKernel::new(space, 0.02, 36.0, mode, &f, 0.3, x, Some(prev), Some(fine)).unwrap();
    assemble(pattern, space.n_elements(), || k.scratch(), |s, e, out| element_ns(&k, s, e, out)).unwrap()
}

#[test]
fn assembled_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (family, k) in [(ElementFamily::LagrangeTaylorHood, 2), (ElementFamily::SplineTaylorHood, 2)] {
        let space = build_space(family, k, 2, [0.0; 2], [1.0; 2]).unwrap();
        let pattern = Arc::new(SparsityPattern::for_mixed(&space));
        let n = space.layout().total();
        let nq = space.quadrature_for(QuadraturePurpose::Assembly).len() * space.n_elements();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prev: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fine: Vec<[f64; 2]> = (0..nq).map(|_| [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for mode in [NsMode::Steady, NsMode::QuasiStatic { dt: 0.05 }, NsMode::Dynamic { dt: 0.05 }] {
            let jv = assembled(&space, &pattern, mode, &x, &prev, &fine).matvec(&dir);
            let eps = 1e-6;
            let shifted = |s: f64| -> Vec<f64> {
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
                assembled(&space, &pattern, mode, &y, &prev, &fine).rhs
            };
            // rhs holds -R
            let (plus, minus) = (shifted(eps), shifted(-eps));
            let fd: Vec<f64> = minus.iter().zip(&plus).map(|(m, p)| (m - p) / (2.0 * eps)).collect();
            let scale = jv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = max_diff(&jv, &fd);
            assert!(err <= 1e-6 * scale, "{family:?} {mode:?}: {err:e} vs {scale:e}");
        }
    }
}

#[test]
fn newton_converges_quadratically_on_the_cavity() {
    let exact = vmsflow::verification::regularized_cavity().unwrap();
    let space = build_space(ElementFamily::LagrangeTaylorHood, 2, 8, [0.0; 2], [1.0; 2]).unwrap();
    use vmsflow::verification::{ManufacturedSolution, Physics};
    let physics = Physics::NavierStokes { nu: 0.01 };
    let source = |x: [f64; 2], t: f64| exact.source(x, t, physics);
    let wall = |x: [f64; 2], t: f64| exact.velocity(x, t);
    let problem = NsProblem::new(&space, 0.01, &source, [BoundaryCondition::Dirichlet(&wall); 4]).unwrap();
    let s = solve_ns_steady(&problem, &NonlinearConfig::default(), None).unwrap();
    let r: Vec<f64> = s.log.iter().map(|l| l.residual).collect();
    let m = r.len();
    assert!(m >= 4 && s.log[m - 3].newton, "{r:?}");
    let order = (r[m - 1] / r[m - 2]).ln() / (r[m - 2] / r[m - 3]).ln();
    assert!(order >= 1.5, "observed order {order}: {r:?}");
}

#[test]
fn nonconvergence_reports_the_history() {
    let case = solve_ns_cavity(&NsCavityConfig {
        family: ElementFamily::LagrangeTaylorHood,
        k: 2,
        n: 4,
        nu: 0.01,
        c_inv: 36.0,
        nonlinear: NonlinearConfig { max_iterations: 1, ..NonlinearConfig::default() },
    });
    match case {
        Err(Error::Nonconvergence { iterations: 1, history }) => assert_eq!(history.len(), 2),
        other => panic!("unexpected {:?}", other.map(|c| c.iterations)),
    }
}

#[test]
fn steady_solution_approaches_galerkin_stokes_for_large_viscosity() {
    let space = build_space(ElementFamily::LagrangeTaylorHood, 2, 4, [0.0; 2], [1.0; 2]).unwrap();
    let f0 = |x: [f64; 2]| [(3.0 * x[1]).sin(), x[0] * x[0] - x[1]];
    let zero = |_: [f64; 2]| [0.0; 2];
    let params = FlowParameters::new(1.0, [0.0; 2], 36.0, 1.0).unwrap();
    let (u_stokes, _) = dense_galerkin(&space, params, &f0, &zero);
    let wall = |_: [f64; 2], _: f64| [0.0; 2];
    let gap = |nu: f64, galerkin: bool| {
        // f = nu f0 keeps the velocity O(1) while advection fades like 1/nu
        let source = |x: [f64; 2], _: f64| f0(x).map(|v| nu * v);
        let mut problem = NsProblem::new(&space, nu, &source, [BoundaryCondition::Dirichlet(&wall); 4]).unwrap();
        problem.galerkin = galerkin;
        let s = solve_ns_steady(&problem, &NonlinearConfig::default(), None).unwrap().solution;
        (0..2).map(|c| max_diff(s.velocity(c), &u_stokes[c])).fold(0.0, f64::max)
    };
    let (g1, g2) = (gap(1e2, true), gap(1e4, true));
    assert!(g2 <= 1e-10 || (g1 / g2 - 100.0).abs() < 1.0, "{g1:e} {g2:e}");
    // the stabilized scheme keeps a nu-independent grad-div contribution
    let (s1, s2) = (gap(1e4, false), gap(1e6, false));
    assert!(s1 > 0.0 && (s1 - s2).abs() <= 1e-2 * s1, "{s1:e} {s2:e}");
}

fn taylor_green_case(family: ElementFamily, k: usize, n: usize, model: SubscaleModel, dt_ratio: f64, t_final: f64) -> vmsflow::verification::SolvedCase {
    solve_taylor_green(&TaylorGreenConfig {
        family,
        k,
        n,
        nu: 0.01,
        c_inv: 36.0,
        subscales: model,
        dt_ratio,
        t_final,
        nonlinear: NonlinearConfig::unsteady(),
    })
    .unwrap()
}

#[test]
fn free_slip_walls_keep_zero_normal_velocity() {
    for (family, k) in [(ElementFamily::LagrangeTaylorHood, 2), (ElementFamily::SplineTaylorHood, 2)] {
        for model in [SubscaleModel::Dynamic, SubscaleModel::QuasiStatic] {
            let case = taylor_green_case(family, k, 4, model, 0.25, 0.3);
            let space = &case.space;
            let (lo, len) = ([-std::f64::consts::PI; 2], 2.0 * std::f64::consts::PI);
            let mut tangential: f64 = 0.0;
            for side in Side::ALL {
                let c = side.normal_component();
                for i in 0..=24 {
                    let s = lo[1 - c] + len * i as f64 / 24.0;
                    let fixed = if matches!(side, Side::Left | Side::Bottom) { lo[c] } else { lo[c] + len };
                    let mut x = [0.0; 2];
                    x[c] = fixed;
                    x[1 - c] = s;
                    let un = space.velocity.evaluate(case.solution.velocity(c), x).unwrap();
                    let ut = space.velocity.evaluate(case.solution.velocity(1 - c), x).unwrap();
                    assert!(un.abs() <= 1e-12, "{family:?} {side:?}: {un:e}");
                    tangential = tangential.max(ut.abs());
                }
            }
            assert!(tangential > 0.1, "tangential slip {tangential}");
            assert!(case.steps.iter().all(|s| s.divergence_residual <= 1e-10));
        }
    }
}

#[test]
fn taylor_green_coarse_energy_tracks_the_exact_decay() {
    let case = taylor_green_case(ElementFamily::LagrangeTaylorHood, 2, 16, SubscaleModel::Dynamic, 0.25, 1.0);
    for s in &case.steps {
        let exact = std::f64::consts::PI.powi(2) * (-0.04 * s.time).exp();
        assert!((s.energy.coarse - exact).abs() <= 0.02 * exact, "t = {}: {} vs {exact}", s.time, s.energy.coarse);
    }
    let subscales = case.steps.len() - 1;
    assert_eq!(case.steps.last().unwrap().step, subscales);
}

/// Stream function `A x^2 (1-x)^2 y^2 (1-y)^2`: divergence free and zero
/// on every wall of the unit square.
fn wall_bounded_velocity(amplitude: f64) -> impl Fn([f64; 2]) -> [f64; 2] + Sync {
    move |[x, y]| {
        let (fx, fy) = (x * x * (1.0 - x).powi(2), y * y * (1.0 - y).powi(2));
        let (dfx, dfy) = (2.0 * x * (1.0 - x) * (1.0 - 2.0 * x), 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y));
        [amplitude * fx * dfy, -amplitude * dfx * fy]
    }
}

#[test]
fn dynamic_subscale_energy_is_non_increasing() {
    let u0 = wall_bounded_velocity(400.0);
    let zero = |_: [f64; 2], _: f64| [0.0; 2];
    for (family, k) in [(ElementFamily::LagrangeTaylorHood, 2), (ElementFamily::SplineTaylorHood, 2)] {
        let space = build_space(family, k, 6, [0.0; 2], [1.0; 2]).unwrap();
        let mut problem = NsProblem::new(&space, 1e-3, &zero, [BoundaryCondition::Dirichlet(&zero); 4]).unwrap();
        problem.subscales = SubscaleModel::Dynamic;
        problem.initial_velocity = Some(&u0);
        let run = run_unsteady(&problem, &TimeStepConfig::new(0.05, 1.0, NonlinearConfig::unsteady()).unwrap()).unwrap();
        let e0 = run.steps[0].energy.total;
        assert!(e0 > 1e-3);
        for w in run.steps.windows(2) {
            assert!(w[1].energy.total <= w[0].energy.total + 1e-12 * e0, "{family:?} step {}: {:e} after {:e}", w[1].step, w[1].energy.total, w[0].energy.total);
            assert!(w[1].divergence_residual <= 1e-10);
        }
    }
}

#[test]
fn quasi_static_and_dynamic_subscales_agree() {
    let qs = taylor_green_case(ElementFamily::LagrangeTaylorHood, 2, 16, SubscaleModel::QuasiStatic, 1.0, 1.0);
    let ds = taylor_green_case(ElementFamily::LagrangeTaylorHood, 2, 16, SubscaleModel::Dynamic, 1.0, 1.0);
    let (a, b) = (qs.errors.h1_u, ds.errors.h1_u);
    assert!((a - b).abs() <= 0.1 * a.max(b), "QS {a:e} DS {b:e}");
}

#[test]
fn midpoint_step_rejects_foreign_state() {
    let space = build_space(ElementFamily::LagrangeTaylorHood, 2, 2, [0.0; 2], [1.0; 2]).unwrap();
    let other = build_space(ElementFamily::LagrangeTaylorHood, 2, 3, [0.0; 2], [1.0; 2]).unwrap();
    let zero = |_: [f64; 2], _: f64| [0.0; 2];
    let problem = NsProblem::new(&space, 0.1, &zero, [BoundaryCondition::FreeSlip; 4]).unwrap();
    let mut ws = NsWorkspace::new(&space);
    let cfg = TimeStepConfig::new(0.1, 0.1, NonlinearConfig::unsteady()).unwrap();
    let foreign = MixedSolution::zeros(other.layout());
    assert!(advance_midpoint_quasistatic(&problem, &mut ws, &foreign, 0.0, &cfg).is_err());
    let bad = SubscaleState { samples: vec![[0.0; 2]; 3], step: 0 };
    let state = MixedSolution::zeros(space.layout());
    assert!(advance_midpoint(&problem, &mut ws, &state, 0.0, &bad, &cfg).is_err());
}
