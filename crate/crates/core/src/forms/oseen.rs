use super::{tau_oseen, FlowParameters, StabEval};
use crate::discretization::{MixedSpace, QuadraturePurpose, Tabulation, Tabulator};
use crate::error::Result;
use crate::linalg::ElementContribution;

pub type SourceFn<'a> = dyn Fn([f64; 2]) -> [f64; 2] + Sync + 'a;

/// Element data for the reduced three-field Oseen system.
pub struct OseenKernel<'a> {
    pub space: &'a MixedSpace,
    pub params: FlowParameters,
    pub stab: StabEval,
    source: &'a SourceFn<'a>,
    velocity: Tabulator<'a>,
    pressure: Tabulator<'a>,
}

#[derive(Default)]
pub struct OseenScratch {
    tv: Tabulation,
    tp: Tabulation,
}

impl<'a> OseenKernel<'a> {
    /// `stabilized = false` gives the Galerkin method (`tau_M = tau_C = 0`).
    pub fn new(space: &'a MixedSpace, params: FlowParameters, stabilized: bool, source: &'a SourceFn<'a>) -> Self {
        let rule = space.quadrature_for(QuadraturePurpose::Assembly);
        let stab = if stabilized { tau_oseen(&params, space.mesh().h()) } else { StabEval::off() };
        Self {
            space,
            params,
            stab,
            source,
            velocity: Tabulator::new(&space.velocity, rule.clone()),
            pressure: Tabulator::new(&space.pressure, rule),
        }
    }

    pub fn scratch(&self) -> OseenScratch {
        OseenScratch::default()
    }
}

/// Element matrix and load of
/// `c(a,u,v) + k(u,v) - b(v,p) + b(u,q) + (tau_C div u, div v)
///  + (a.grad u - div(2 nu grad^s u) + grad p~, tau_M (a.grad v + grad q~))`
/// with load `(f, v + tau_M (a.grad v + grad q~))`.
pub fn element_oseen(k: &OseenKernel<'_>, s: &mut OseenScratch, element: usize, out: &mut ElementContribution) -> Result<()> {
    k.space.element_global_dofs(element, &mut out.dofs);
    out.reset(out.dofs.len());
    k.velocity.tabulate(element, &mut s.tv)?;
    k.pressure.tabulate(element, &mut s.tp)?;
    let (tv, tp) = (&s.tv, &s.tp);
    let nv = tv.n_basis;
    let np = tp.n_basis;
    let (op, opt) = (2 * nv, 2 * nv + np);
    let a = k.params.a;
    let nu = k.params.nu;
    let (tau_m, tau_c) = (k.stab.tau_m, k.stab.tau_c);

    let mut adv = vec![0.0; nv];
    // strong viscous operator of u = N_b e_d, component c: nu (lap_b delta_cd + H_b[c][d])
    let mut visc = vec![[[0.0; 2]; 2]; nv];
    for q in 0..tv.n_points {
        let w = tv.jxw[q];
        let f = (k.source)(tv.points[q]);
        for b in 0..nv {
            let g = tv.grad(q, b);
            adv[b] = a[0] * g[0] + a[1] * g[1];
            let h = tv.hess(q, b);
            let lap = h[0] + h[2];
            let hm = [[h[0], h[1]], [h[1], h[2]]];
            for c in 0..2 {
                for d in 0..2 {
                    visc[b][c][d] = nu * (if c == d { lap } else { 0.0 } + hm[c][d]);
                }
            }
        }
        for ai in 0..nv {
            let na = tv.val(q, ai);
            let ga = tv.grad(q, ai);
            for c in 0..2 {
                let row = c * nv + ai;
                out.vector[row] += w * f[c] * (na + tau_m * adv[ai]);
                for bj in 0..nv {
                    let gb = tv.grad(q, bj);
                    for d in 0..2 {
                        let col = d * nv + bj;
                        let mut v = nu * ga[d] * gb[c] + tau_c * ga[c] * gb[d] - tau_m * adv[ai] * visc[bj][c][d];
                        if c == d {
                            v += na * adv[bj] + nu * (ga[0] * gb[0] + ga[1] * gb[1]) + tau_m * adv[ai] * adv[bj];
                        }
                        *out.entry(row, col) += w * v;
                    }
                }
                for m in 0..np {
                    let gm = tp.grad(q, m);
                    *out.entry(row, op + m) -= w * tp.val(q, m) * ga[c];
                    *out.entry(row, opt + m) += w * tau_m * adv[ai] * gm[c];
                }
            }
        }
        for n in 0..np {
            let mn = tp.val(q, n);
            let gn = tp.grad(q, n);
            out.vector[opt + n] += w * tau_m * (f[0] * gn[0] + f[1] * gn[1]);
            for bj in 0..nv {
                let gb = tv.grad(q, bj);
                for d in 0..2 {
                    let col = d * nv + bj;
                    *out.entry(op + n, col) += w * mn * gb[d];
                    let r = gn[d] * adv[bj] - (gn[0] * visc[bj][0][d] + gn[1] * visc[bj][1][d]);
                    *out.entry(opt + n, col) += w * tau_m * r;
                }
            }
            for m in 0..np {
                let gm = tp.grad(q, m);
                *out.entry(opt + n, opt + m) += w * tau_m * (gn[0] * gm[0] + gn[1] * gm[1]);
            }
        }
    }
    Ok(())
}
