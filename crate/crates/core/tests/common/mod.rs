#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use vmsflow::discretization::{MixedSpace, QuadraturePurpose, Tabulation, Tabulator};
use vmsflow::forms::FlowParameters;
use vmsflow::oseen::{solve_oseen, OseenProblem, OseenStabilization};
use vmsflow::verification::{build_space, cavity_advection, ElementFamily};

/// Divergence-free polynomial velocity from a stream function, with its
/// Laplacian, and a zero-mean pressure on the unit square.
pub struct PolynomialFlow {
    pub velocity: fn([f64; 2]) -> [f64; 2],
    pub gradient: fn([f64; 2]) -> [[f64; 2]; 2],
    pub laplacian: fn([f64; 2]) -> [f64; 2],
    pub pressure: fn([f64; 2]) -> f64,
    pub pressure_gradient: fn([f64; 2]) -> [f64; 2],
}

/// psi = x^2 y + x y^2 + y^3 - x^3, p = x + y - 1
pub fn quadratic_flow() -> PolynomialFlow {
    PolynomialFlow {
        velocity: |[x, y]| [x * x + 2.0 * x * y + 3.0 * y * y, 3.0 * x * x - 2.0 * x * y - y * y],
        gradient: |[x, y]| [[2.0 * x + 2.0 * y, 2.0 * x + 6.0 * y], [6.0 * x - 2.0 * y, -2.0 * x - 2.0 * y]],
        laplacian: |_| [8.0, 4.0],
        pressure: |[x, y]| x + y - 1.0,
        pressure_gradient: |_| [1.0, 1.0],
    }
}

/// psi = x^3 y - x y^3 + x^2 y^2, p = x^2 + y^2 - 2/3
pub fn cubic_flow() -> PolynomialFlow {
    PolynomialFlow {
        velocity: |[x, y]| {
            [x * x * x - 3.0 * x * y * y + 2.0 * x * x * y, -3.0 * x * x * y + y * y * y - 2.0 * x * y * y]
        },
        gradient: |[x, y]| {
            [
                [3.0 * x * x - 3.0 * y * y + 4.0 * x * y, -6.0 * x * y + 2.0 * x * x],
                [-6.0 * x * y - 2.0 * y * y, -3.0 * x * x + 3.0 * y * y - 4.0 * x * y],
            ]
        },
        laplacian: |[x, y]| [4.0 * y, -4.0 * x],
        pressure: |[x, y]| x * x + y * y - 2.0 / 3.0,
        pressure_gradient: |[x, y]| [2.0 * x, 2.0 * y],
    }
}

/// Plain Galerkin Taylor-Hood by dense assembly on interior velocities,
/// with the zero-mean pressure enforced by a bordered row.
pub fn dense_galerkin(
    space: &MixedSpace,
    params: FlowParameters,
    f: &dyn Fn([f64; 2]) -> [f64; 2],
    g: &dyn Fn([f64; 2]) -> [f64; 2],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let v = &space.velocity;
    let mut lifted = [vec![0.0; v.n_dofs], vec![0.0; v.n_dofs]];
    let mut fixed = vec![false; v.n_dofs];
    for side in vmsflow::discretization::Side::ALL {
        for c in 0..2 {
            // corner values agree between sides for continuous data
            for (d, val) in v.boundary_values(side, |x| g(x)[c]).unwrap() {
                lifted[c][d] = val;
            }
        }
        for &d in &v.boundary_dofs[side.index()] {
            fixed[d] = true;
        }
    }
    let free: Vec<usize> = (0..v.n_dofs).filter(|&d| !fixed[d]).collect();
    let mut index = vec![usize::MAX; v.n_dofs];
    for (i, &d) in free.iter().enumerate() {
        index[d] = i;
    }
    let nf = free.len();
    let np = space.pressure.n_dofs;
    let n = 2 * nf + np + 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let rule = space.quadrature_for(QuadraturePurpose::Assembly);
    let tv = Tabulator::new(v, rule.clone());
    let tp = Tabulator::new(&space.pressure, rule);
    let (mut a, mut b) = (Tabulation::default(), Tabulation::default());
    let sym = |g: [f64; 2], c: usize| -> [[f64; 2]; 2] {
        let mut e = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let gij = if i == c { g[j] } else { 0.0 };
                let gji = if j == c { g[i] } else { 0.0 };
                e[i][j] = 0.5 * (gij + gji);
            }
        }
        e
    };
    for e in 0..space.n_elements() {
        tv.tabulate(e, &mut a).unwrap();
        tp.tabulate(e, &mut b).unwrap();
        let vd = v.element_dofs(e);
        let pd = space.pressure.element_dofs(e);
        for q in 0..a.n_points {
            let w = a.jxw[q];
            let fx = f(a.points[q]);
            for (i, &di) in vd.iter().enumerate() {
                if fixed[di] {
                    continue;
                }
                for ci in 0..2 {
                    let row = ci * nf + index[di];
                    rhs[row] += w * fx[ci] * a.val(q, i);
                    let ei = sym(a.grad(q, i), ci);
                    for (j, &dj) in vd.iter().enumerate() {
                        for cj in 0..2 {
                            let ej = sym(a.grad(q, j), cj);
                            let mut val = 0.0;
                            for r in 0..2 {
                                for s in 0..2 {
                                    val += 2.0 * params.nu * ei[r][s] * ej[r][s];
                                }
                            }
                            if ci == cj {
                                let gj = a.grad(q, j);
                                val += (params.a[0] * gj[0] + params.a[1] * gj[1]) * a.val(q, i);
                            }
                            if fixed[dj] {
                                rhs[row] -= w * val * lifted[cj][dj];
                            } else {
                                m[(row, cj * nf + index[dj])] += w * val;
                            }
                        }
                    }
                    for (l, &pl) in pd.iter().enumerate() {
                        m[(row, 2 * nf + pl)] -= w * b.val(q, l) * a.grad(q, i)[ci];
                    }
                }
            }
            for (l, &pl) in pd.iter().enumerate() {
                let row = 2 * nf + pl;
                m[(2 * nf + np, row)] += w * b.val(q, l);
                m[(row, 2 * nf + np)] += w * b.val(q, l);
                for (j, &dj) in vd.iter().enumerate() {
                    for cj in 0..2 {
                        let val = w * b.val(q, l) * a.grad(q, j)[cj];
                        if fixed[dj] {
                            rhs[row] -= val * lifted[cj][dj];
                        } else {
                            m[(row, cj * nf + index[dj])] += val;
                        }
                    }
                }
            }
        }
    }
    let x = m.lu().solve(&rhs).expect("dense Galerkin system is singular");
    let mut u = lifted.clone();
    for c in 0..2 {
        for (i, &d) in free.iter().enumerate() {
            u[c][d] = x[c * nf + i];
        }
    }
    let p = (0..np).map(|i| x[2 * nf + i]).collect();
    (u.to_vec(), p)
}

pub fn oseen_source(flow: &PolynomialFlow, params: FlowParameters) -> impl Fn([f64; 2]) -> [f64; 2] + Sync + '_ {
    move |x| {
        let g = (flow.gradient)(x);
        let l = (flow.laplacian)(x);
        let gp = (flow.pressure_gradient)(x);
        let a = params.a;
        std::array::from_fn(|c| a[0] * g[c][0] + a[1] * g[c][1] - params.nu * l[c] + gp[c])
    }
}

/// Largest nodal error of the stabilized Oseen solution on a 3x3 mesh of
/// the unit square when the exact solution lies in the discrete space.
pub fn oseen_patch_error(family: ElementFamily, k: usize, flow: &PolynomialFlow, nu: f64) -> f64 {
    let space = build_space(family, k, 3, [0.0; 2], [1.0; 2]).unwrap();
    let params = FlowParameters::new(nu, cavity_advection(), 36.0, 1.0).unwrap();
    let source = oseen_source(flow, params);
    let boundary = |x: [f64; 2]| (flow.velocity)(x);
    let problem = OseenProblem {
        space: &space,
        params,
        source: &source,
        boundary: &boundary,
        stabilization: OseenStabilization::Sharp,
    };
    let sol = solve_oseen(&problem).unwrap();
    let mut worst: f64 = 0.0;
    for c in 0..2 {
        let exact = space.velocity.interpolate(|x| (flow.velocity)(x)[c]).unwrap();
        for (a, b) in sol.velocity(c).iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    let p = space.pressure.interpolate(flow.pressure).unwrap();
    for field in [sol.pressure(), sol.total_pressure()] {
        for (a, b) in field.iter().zip(&p) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
