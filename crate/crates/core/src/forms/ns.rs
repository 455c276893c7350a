use nalgebra::{Const, SVector};
use num_dual::{Derivative, DualNum, DualSVec64};
use rayon::prelude::*;

use super::{tau_smoothed, StabEval};
use crate::discretization::{MixedSpace, QuadraturePurpose, Tabulation, Tabulator};
use crate::error::{Error, Result};
use crate::linalg::ElementContribution;

/// Time discretization seen by the element kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NsMode {
    /// Steady problem with quasi-static subscales.
    Steady,
    /// Implicit midpoint step with quasi-static subscales and the unsteady
    /// smoothed `tau_M`.
    QuasiStatic { dt: f64 },
    /// Implicit midpoint step with dynamic subscales.
    Dynamic { dt: f64 },
}

impl NsMode {
    fn theta(self) -> f64 {
        match self {
            NsMode::Steady => 1.0,
            _ => 0.5,
        }
    }

    fn inv_dt(self) -> f64 {
        match self {
            NsMode::Steady => 0.0,
            NsMode::QuasiStatic { dt } | NsMode::Dynamic { dt } => 1.0 / dt,
        }
    }
}

/// Coarse fields at a point. `w`/`gw` are the advecting velocity and its
/// gradient; they equal `u`/`gu` but are separate inputs so that a Picard
/// linearization can freeze them.
#[derive(Debug, Clone, Copy)]
pub struct PointState<D> {
    pub u: [D; 2],
    /// `gu[i][j] = d_j u_i`
    pub gu: [[D; 2]; 2],
    /// `lap u + grad div u`
    pub vis: [D; 2],
    pub dtu: [D; 2],
    pub p: D,
    /// gradient of `p~ = p + p'`
    pub gpt: [D; 2],
    pub w: [D; 2],
    pub gw: [[D; 2]; 2],
}

/// Pointwise data that do not depend on the unknowns.
#[derive(Debug, Clone, Copy)]
pub struct PointParams {
    pub nu: f64,
    pub c_inv: f64,
    pub metric: [[f64; 2]; 2],
    pub mode: NsMode,
    pub f: [f64; 2],
    /// `u'_{n-1}` (dynamic subscales only).
    pub fine_old: [f64; 2],
    pub galerkin: bool,
}

/// Test-function coefficients: the velocity residual against `N_a e_c` is
/// `N_a x[c] + grad N_a . y[c]`, the fine continuity residual against `q~`
/// is `-grad q~ . fine`.
#[derive(Debug, Clone, Copy)]
pub struct PointOutput<D> {
    pub x: [D; 2],
    pub y: [[D; 2]; 2],
    /// Subscale in the fine continuity equation: `u'` (quasi-static) or
    /// `u'_n` (dynamic).
    pub fine: [D; 2],
    pub tau_m: D,
}

fn smoothed_tau<D: DualNum<f64> + Copy>(w: [D; 2], p: &PointParams) -> (D, D) {
    let g = &p.metric;
    let kappa = match p.mode {
        NsMode::QuasiStatic { dt } => 4.0 / (dt * dt),
        _ => 0.0,
    };
    let gg = g[0][0] * g[0][0] + 2.0 * g[0][1] * g[1][0] + g[1][1] * g[1][1];
    let mut ugu = D::from(kappa + p.c_inv * p.c_inv * p.nu * p.nu * gg);
    for i in 0..2 {
        for j in 0..2 {
            ugu += w[i] * w[j] * g[i][j];
        }
    }
    let tau_m = ugu.sqrt().recip();
    let tau_c = (tau_m * (g[0][0] + g[1][1])).recip();
    (tau_m, tau_c)
}

/// Pointwise coarse residual coefficients and subscale. Returns `None` when
/// the dynamic subscale matrix is singular.
pub fn ns_pointwise<D: DualNum<f64> + Copy>(s: &PointState<D>, p: &PointParams) -> Option<PointOutput<D>> {
    let zero = D::from(0.0);
    let nu = p.nu;
    let (tau_m, tau_c) = if p.galerkin { (zero, zero) } else { smoothed_tau(s.w, p) };

    let mut r = [zero; 2];
    for i in 0..2 {
        r[i] = s.dtu[i] + s.gu[i][0] * s.w[0] + s.gu[i][1] * s.w[1] - s.vis[i] * nu + s.gpt[i] - p.f[i];
    }

    // (midpoint subscale, its time difference, subscale in fine continuity)
    let (um, dfine, fine) = if p.galerkin {
        ([zero; 2], [zero; 2], [zero; 2])
    } else {
        match p.mode {
            NsMode::Steady | NsMode::QuasiStatic { .. } => {
                let u = [-tau_m * r[0], -tau_m * r[1]];
                (u, [zero; 2], u)
            }
            NsMode::Dynamic { dt } => {
                let idt = 1.0 / dt;
                let half_inv_tau = (tau_m * 2.0).recip();
                let a = half_inv_tau + idt;
                let b = -half_inv_tau + idt;
                let m = [
                    [a + s.gw[0][0] * 0.5, s.gw[0][1] * 0.5],
                    [s.gw[1][0] * 0.5, a + s.gw[1][1] * 0.5],
                ];
                let o = p.fine_old;
                let rhs = [
                    -r[0] + b * o[0] - (s.gw[0][0] * o[0] + s.gw[0][1] * o[1]) * 0.5,
                    -r[1] + b * o[1] - (s.gw[1][0] * o[0] + s.gw[1][1] * o[1]) * 0.5,
                ];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.re() == 0.0 || !det.re().is_finite() {
                    return None;
                }
                let un = [
                    (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
                    (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
                ];
                let um = [(un[0] + o[0]) * 0.5, (un[1] + o[1]) * 0.5];
                let d = [(un[0] - o[0]) * idt, (un[1] - o[1]) * idt];
                (um, d, un)
            }
        }
    };

    let div = s.gu[0][0] + s.gu[1][1];
    let mut x = [zero; 2];
    let mut y = [[zero; 2]; 2];
    for c in 0..2 {
        let adv_w = s.gu[c][0] * s.w[0] + s.gu[c][1] * s.w[1];
        let adv_f = s.gu[c][0] * um[0] + s.gu[c][1] * um[1];
        x[c] = s.dtu[c] + dfine[c] + (adv_w + adv_f) * 0.5 - p.f[c];
        for j in 0..2 {
            let mut v = -s.u[c] * s.w[j] * 0.5 + (s.gu[c][j] + s.gu[j][c]) * nu
                - um[c] * s.w[j]
                - s.u[c] * um[j] * 0.5
                - um[c] * um[j];
            if c == j {
                v += -s.p + tau_c * div;
            }
            y[c][j] = v;
        }
    }
    Some(PointOutput { x, y, fine, tau_m })
}

const NS: usize = 19;
type Dual = DualSVec64<NS>;

const I_U: usize = 0;
const I_GU: usize = 2;
const I_VIS: usize = 6;
const I_DTU: usize = 8;
const I_P: usize = 10;
const I_GPT: usize = 11;
const I_W: usize = 13;
const I_GW: usize = 15;

fn seeded(v: f64, i: usize) -> Dual {
    let mut e = SVector::<f64, NS>::zeros();
    e[i] = 1.0;
    Dual::new(v, Derivative::some(e))
}

fn eps(d: &Dual) -> SVector<f64, NS> {
    d.eps.unwrap_generic(Const::<NS>, Const::<1>)
}

pub type TimeSourceFn<'a> = dyn Fn([f64; 2], f64) -> [f64; 2] + Sync + 'a;

/// Element kernel for the Navier-Stokes residual and its Jacobian.
pub struct NsKernel<'a> {
    pub space: &'a MixedSpace,
    pub nu: f64,
    pub c_inv: f64,
    pub mode: NsMode,
    /// Exact Jacobian if true, Picard (frozen advection and `tau`) otherwise.
    pub newton: bool,
    /// Drop all stabilization and subscale terms.
    pub galerkin: bool,
    /// Time at which the source is evaluated.
    pub time: f64,
    source: &'a TimeSourceFn<'a>,
    /// Current iterate (unknowns at `t_n`).
    pub state: &'a [f64],
    /// Converged state at `t_{n-1}` (unsteady modes).
    pub previous: Option<&'a [f64]>,
    /// `u'_{n-1}` per element and quadrature point (dynamic subscales).
    pub fine_old: Option<&'a [[f64; 2]]>,
    velocity: Tabulator<'a>,
    pressure: Tabulator<'a>,
}

#[derive(Default)]
pub struct NsScratch {
    tv: Tabulation,
    tp: Tabulation,
}

impl<'a> NsKernel<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: &'a MixedSpace,
        nu: f64,
        c_inv: f64,
        mode: NsMode,
        source: &'a TimeSourceFn<'a>,
        time: f64,
        state: &'a [f64],
        previous: Option<&'a [f64]>,
        fine_old: Option<&'a [[f64; 2]]>,
    ) -> Result<Self> {
        let rule = space.quadrature_for(QuadraturePurpose::Assembly);
        if state.len() != space.layout().total() {
            return Err(Error::DimensionMismatch("state vector does not match the mixed space".into()));
        }
        if !matches!(mode, NsMode::Steady) && previous.is_none() {
            return Err(Error::Configuration("unsteady kernel needs the previous state".into()));
        }
        if let NsMode::Dynamic { .. } = mode {
            let expected = space.n_elements() * rule.len();
            if fine_old.map(|f| f.len()) != Some(expected) {
                return Err(Error::DimensionMismatch(format!(
                    "dynamic subscales need {expected} samples"
                )));
            }
        }
        Ok(Self {
            space,
            nu,
            c_inv,
            mode,
            newton: true,
            galerkin: false,
            time,
            source,
            state,
            previous,
            fine_old,
            velocity: Tabulator::new(&space.velocity, rule.clone()),
            pressure: Tabulator::new(&space.pressure, rule),
        })
    }

    pub fn n_points(&self) -> usize {
        self.velocity.rule.len()
    }

    pub fn scratch(&self) -> NsScratch {
        NsScratch::default()
    }

    /// Coarse fields at point `q` of the current tabulation: (state at the
    /// evaluation time, divergence of `u_n`).
    fn point_state(&self, s: &NsScratch, element: usize, q: usize) -> (PointState<f64>, f64) {
        let l = self.space.layout();
        let vd = self.space.velocity.element_dofs(element);
        let pd = self.space.pressure.element_dofs(element);
        let tv = &s.tv;
        let tp = &s.tp;
        let field = |x: &[f64]| {
            let mut u = [0.0; 2];
            let mut gu = [[0.0; 2]; 2];
            let mut vis = [0.0; 2];
            for (a, &d) in vd.iter().enumerate() {
                let n = tv.val(q, a);
                let g = tv.grad(q, a);
                let h = tv.hess(q, a);
                let hm = [[h[0], h[1]], [h[1], h[2]]];
                for c in 0..2 {
                    let coef = x[l.velocity(c, d)];
                    u[c] += coef * n;
                    gu[c][0] += coef * g[0];
                    gu[c][1] += coef * g[1];
                    // lap u_c + d_c div u, with u = coef N e_c
                    for i in 0..2 {
                        vis[i] += coef * if i == c { h[0] + h[2] + hm[i][c] } else { hm[i][c] };
                    }
                }
            }
            (u, gu, vis)
        };
        let (un, gun, visn) = field(self.state);
        let div_n = gun[0][0] + gun[1][1];
        let theta = self.mode.theta();
        let (u, gu, vis, dtu) = match self.previous {
            Some(prev) if !matches!(self.mode, NsMode::Steady) => {
                let (uo, guo, viso) = field(prev);
                let mix = |a: f64, b: f64| theta * a + (1.0 - theta) * b;
                let idt = self.mode.inv_dt();
                (
                    [mix(un[0], uo[0]), mix(un[1], uo[1])],
                    [
                        [mix(gun[0][0], guo[0][0]), mix(gun[0][1], guo[0][1])],
                        [mix(gun[1][0], guo[1][0]), mix(gun[1][1], guo[1][1])],
                    ],
                    [mix(visn[0], viso[0]), mix(visn[1], viso[1])],
                    [(un[0] - uo[0]) * idt, (un[1] - uo[1]) * idt],
                )
            }
            _ => (un, gun, visn, [0.0; 2]),
        };
        let mut p = 0.0;
        let mut gpt = [0.0; 2];
        for (m, &d) in pd.iter().enumerate() {
            p += self.state[l.pressure(d)] * tp.val(q, m);
            let g = tp.grad(q, m);
            let c = self.state[l.fine_pressure(d)];
            gpt[0] += c * g[0];
            gpt[1] += c * g[1];
        }
        (PointState { u, gu, vis, dtu, p, gpt, w: u, gw: gu }, div_n)
    }

    fn point_params(&self, s: &NsScratch, element: usize, q: usize) -> PointParams {
        let fine_old = match (self.mode, self.fine_old) {
            (NsMode::Dynamic { .. }, Some(f)) => f[element * self.n_points() + q],
            _ => [0.0; 2],
        };
        PointParams {
            nu: self.nu,
            c_inv: self.c_inv,
            metric: s.tv.metric(),
            mode: self.mode,
            f: (self.source)(s.tv.points[q], self.time),
            fine_old,
            galerkin: self.galerkin,
        }
    }

    fn tabulate(&self, s: &mut NsScratch, element: usize) -> Result<()> {
        self.velocity.tabulate(element, &mut s.tv)?;
        self.pressure.tabulate(element, &mut s.tp)
    }

    /// Stabilization parameters at every point of an element (diagnostics).
    pub fn stabilization(&self, element: usize) -> Result<Vec<StabEval>> {
        let mut s = self.scratch();
        self.tabulate(&mut s, element)?;
        (0..s.tv.n_points)
            .map(|q| {
                let (st, _) = self.point_state(&s, element, q);
                let dt = match self.mode {
                    NsMode::QuasiStatic { dt } => Some(dt),
                    _ => None,
                };
                tau_smoothed(st.w, &s.tv.metric(), self.nu, self.c_inv, dt)
            })
            .collect()
    }
}

/// Element residual (stored negated in `out.vector`) and Jacobian of the
/// coarse momentum, continuity and fine continuity equations.
pub fn element_ns(k: &NsKernel<'_>, s: &mut NsScratch, element: usize, out: &mut ElementContribution) -> Result<()> {
    k.space.element_global_dofs(element, &mut out.dofs);
    out.reset(out.dofs.len());
    k.tabulate(s, element)?;
    let nv = s.tv.n_basis;
    let np = s.tp.n_basis;
    let (op, opt) = (2 * nv, 2 * nv + np);
    let theta = k.mode.theta();
    let idt = k.mode.inv_dt();
    let newton = if k.newton { 1.0 } else { 0.0 };

    // derivative of the 8 outputs (x, y, fine) w.r.t. each local unknown
    let n_local = out.dofs.len();
    let mut dout = vec![[0.0; 8]; n_local];

    for q in 0..s.tv.n_points {
        let w = s.tv.jxw[q];
        let (st, div_n) = k.point_state(s, element, q);
        let params = k.point_params(s, element, q);
        let ds = PointState {
            u: [seeded(st.u[0], I_U), seeded(st.u[1], I_U + 1)],
            gu: [
                [seeded(st.gu[0][0], I_GU), seeded(st.gu[0][1], I_GU + 1)],
                [seeded(st.gu[1][0], I_GU + 2), seeded(st.gu[1][1], I_GU + 3)],
            ],
            vis: [seeded(st.vis[0], I_VIS), seeded(st.vis[1], I_VIS + 1)],
            dtu: [seeded(st.dtu[0], I_DTU), seeded(st.dtu[1], I_DTU + 1)],
            p: seeded(st.p, I_P),
            gpt: [seeded(st.gpt[0], I_GPT), seeded(st.gpt[1], I_GPT + 1)],
            w: [seeded(st.w[0], I_W), seeded(st.w[1], I_W + 1)],
            gw: [
                [seeded(st.gw[0][0], I_GW), seeded(st.gw[0][1], I_GW + 1)],
                [seeded(st.gw[1][0], I_GW + 2), seeded(st.gw[1][1], I_GW + 3)],
            ],
        };
        let o = ns_pointwise(&ds, &params).ok_or(Error::SingularSubscaleMatrix { element, point: q })?;
        let outs = [o.x[0], o.x[1], o.y[0][0], o.y[0][1], o.y[1][0], o.y[1][1], o.fine[0], o.fine[1]];
        let vals: [f64; 8] = std::array::from_fn(|i| outs[i].re);
        let jac: [SVector<f64, NS>; 8] = std::array::from_fn(|i| eps(&outs[i]));

        // chain rule: derivative of each output w.r.t. each local unknown
        for b in 0..nv {
            let nb = s.tv.val(q, b);
            let gb = s.tv.grad(q, b);
            let h = s.tv.hess(q, b);
            let hm = [[h[0], h[1]], [h[1], h[2]]];
            let lap = h[0] + h[2];
            for d in 0..2 {
                let mut dv = [0.0; 8];
                for (i, ji) in jac.iter().enumerate() {
                    let mut acc = theta * nb * (ji[I_U + d] + newton * ji[I_W + d]);
                    for j in 0..2 {
                        acc += theta * gb[j] * (ji[I_GU + 2 * d + j] + newton * ji[I_GW + 2 * d + j]);
                    }
                    for c in 0..2 {
                        let dvis = if c == d { lap + hm[c][d] } else { hm[c][d] };
                        acc += theta * dvis * ji[I_VIS + c];
                    }
                    acc += idt * nb * ji[I_DTU + d];
                    dv[i] = acc;
                }
                dout[d * nv + b] = dv;
            }
        }
        for m in 0..np {
            let mm = s.tp.val(q, m);
            let gm = s.tp.grad(q, m);
            dout[op + m] = std::array::from_fn(|i| mm * jac[i][I_P]);
            dout[opt + m] = std::array::from_fn(|i| gm[0] * jac[i][I_GPT] + gm[1] * jac[i][I_GPT + 1]);
        }

        for a in 0..nv {
            let na = s.tv.val(q, a);
            let ga = s.tv.grad(q, a);
            for c in 0..2 {
                let row = c * nv + a;
                let res = na * vals[c] + ga[0] * vals[2 + 2 * c] + ga[1] * vals[3 + 2 * c];
                out.vector[row] -= w * res;
                let base = row * n_local;
                for (col, dv) in dout.iter().enumerate() {
                    out.matrix[base + col] += w * (na * dv[c] + ga[0] * dv[2 + 2 * c] + ga[1] * dv[3 + 2 * c]);
                }
            }
        }
        for n in 0..np {
            let mn = s.tp.val(q, n);
            let gn = s.tp.grad(q, n);
            out.vector[op + n] -= w * mn * div_n;
            for b in 0..nv {
                let gb = s.tv.grad(q, b);
                for d in 0..2 {
                    *out.entry(op + n, d * nv + b) += w * mn * gb[d];
                }
            }
            out.vector[opt + n] += w * (gn[0] * vals[6] + gn[1] * vals[7]);
            let base = (opt + n) * n_local;
            for (col, dv) in dout.iter().enumerate() {
                out.matrix[base + col] -= w * (gn[0] * dv[6] + gn[1] * dv[7]);
            }
        }
    }
    Ok(())
}

/// Subscale `u'` (quasi-static) or `u'_n` (dynamic) at every quadrature
/// point, laid out element by element.
pub fn subscale_samples(k: &NsKernel<'_>) -> Result<Vec<[f64; 2]>> {
    let nq = k.n_points();
    let per_element: Vec<Result<Vec<[f64; 2]>>> = (0..k.space.n_elements())
        .into_par_iter()
        .map_init(
            || k.scratch(),
            |s, e| {
                k.tabulate(s, e)?;
                (0..nq)
                    .map(|q| {
                        let (st, _) = k.point_state(s, e, q);
                        let params = k.point_params(s, e, q);
                        ns_pointwise(&st, &params)
                            .map(|o| o.fine)
                            .ok_or(Error::SingularSubscaleMatrix { element: e, point: q })
                    })
                    .collect()
            },
        )
        .collect();
    let mut out = Vec::with_capacity(nq * k.space.n_elements());
    for v in per_element {
        out.extend(v?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> PointState<f64> {
        let u = [0.4, -0.9];
        let gu = [[0.3, -1.1], [0.7, -0.3]];
        PointState { u, gu, vis: [0.2, -0.5], dtu: [0.1, 0.05], p: 0.3, gpt: [-0.2, 0.6], w: u, gw: gu }
    }

    fn params(mode: NsMode) -> PointParams {
        PointParams {
            nu: 0.01,
            c_inv: 36.0,
            metric: [[64.0, 0.0], [0.0, 64.0]],
            mode,
            f: [0.3, -0.1],
            fine_old: [0.02, -0.03],
            galerkin: false,
        }
    }

    #[test]
    fn dynamic_update_matches_uncondensed_solve() {
        // Oracle: solve the midpoint fine-scale equation
        // (u_n - u_o)/dt + (u_n + u_o)/(2 tau) + grad u (u_n + u_o)/2 = -r
        // as a dense 2x2 system.
        let st = sample_state();
        let dt = 0.05;
        let p = params(NsMode::Dynamic { dt });
        let o = ns_pointwise(&st, &p).unwrap();
        let (tau, _) = smoothed_tau(st.w, &p);
        let r: Vec<f64> = (0..2)
            .map(|i| st.dtu[i] + st.gu[i][0] * st.u[0] + st.gu[i][1] * st.u[1] - p.nu * st.vis[i] + st.gpt[i] - p.f[i])
            .collect();
        let g = nalgebra::Matrix2::new(st.gu[0][0], st.gu[0][1], st.gu[1][0], st.gu[1][1]);
        let id = nalgebra::Matrix2::identity();
        let lhs = id / dt + id / (2.0 * tau) + g * 0.5;
        let uo = nalgebra::Vector2::new(p.fine_old[0], p.fine_old[1]);
        let rhs = -nalgebra::Vector2::new(r[0], r[1]) + uo / dt - uo / (2.0 * tau) - g * uo * 0.5;
        let un = lhs.lu().solve(&rhs).unwrap();
        assert!((o.fine[0] - un[0]).abs() < 1e-12 && (o.fine[1] - un[1]).abs() < 1e-12);
        let direct = super::super::subscale_update([r[0], r[1]], st.gu, p.fine_old, tau, dt).unwrap();
        assert!((direct[0] - un[0]).abs() < 1e-12 && (direct[1] - un[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_state_gives_zero_residual() {
        let z = PointState { u: [0.0; 2], gu: [[0.0; 2]; 2], vis: [0.0; 2], dtu: [0.0; 2], p: 0.0, gpt: [0.0; 2], w: [0.0; 2], gw: [[0.0; 2]; 2] };
        let mut p = params(NsMode::Steady);
        p.f = [0.0; 2];
        let o = ns_pointwise(&z, &p).unwrap();
        assert!(o.x.iter().chain(o.y.iter().flatten()).chain(o.fine.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn galerkin_switch_off_is_skew_galerkin() {
        let st = sample_state();
        let mut p = params(NsMode::Steady);
        p.galerkin = true;
        let o = ns_pointwise(&st, &p).unwrap();
        for c in 0..2 {
            let adv = st.gu[c][0] * st.u[0] + st.gu[c][1] * st.u[1];
            assert!((o.x[c] - (st.dtu[c] + 0.5 * adv - p.f[c])).abs() < 1e-15);
            for j in 0..2 {
                let mut y = -0.5 * st.u[c] * st.u[j] + p.nu * (st.gu[c][j] + st.gu[j][c]);
                if c == j {
                    y -= st.p;
                }
                assert!((o.y[c][j] - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dual_derivatives_match_finite_differences() {
        let st = sample_state();
        for mode in [NsMode::Steady, NsMode::QuasiStatic { dt: 0.1 }, NsMode::Dynamic { dt: 0.1 }] {
            let p = params(mode);
            let flat = |s: &PointState<f64>| -> Vec<f64> {
                let o = ns_pointwise(s, &p).unwrap();
                vec![o.x[0], o.x[1], o.y[0][0], o.y[0][1], o.y[1][0], o.y[1][1], o.fine[0], o.fine[1]]
            };
            // perturb u and w together (the Newton direction)
            let e = 1e-6;
            let mut plus = st;
            let mut minus = st;
            plus.u[1] += e;
            plus.w[1] += e;
            minus.u[1] -= e;
            minus.w[1] -= e;
            let fd: Vec<f64> = flat(&plus).iter().zip(flat(&minus)).map(|(a, b)| (a - b) / (2.0 * e)).collect();
            let mut ds: PointState<Dual> = PointState {
                u: [Dual::from(st.u[0]), seeded(st.u[1], 0)],
                gu: [[Dual::from(st.gu[0][0]), Dual::from(st.gu[0][1])], [Dual::from(st.gu[1][0]), Dual::from(st.gu[1][1])]],
                vis: [Dual::from(st.vis[0]), Dual::from(st.vis[1])],
                dtu: [Dual::from(st.dtu[0]), Dual::from(st.dtu[1])],
                p: Dual::from(st.p),
                gpt: [Dual::from(st.gpt[0]), Dual::from(st.gpt[1])],
                w: [Dual::from(st.w[0]), seeded(st.w[1], 0)],
                gw: [[Dual::from(st.gw[0][0]), Dual::from(st.gw[0][1])], [Dual::from(st.gw[1][0]), Dual::from(st.gw[1][1])]],
            };
            ds.p = Dual::from(st.p);
            let o = ns_pointwise(&ds, &p).unwrap();
            let outs = [o.x[0], o.x[1], o.y[0][0], o.y[0][1], o.y[1][0], o.y[1][1], o.fine[0], o.fine[1]];
            for (i, d) in outs.iter().enumerate() {
                let ad = eps(d)[0];
                assert!((ad - fd[i]).abs() < 1e-7 * ad.abs().max(1.0), "{mode:?} output {i}: {ad} vs {}", fd[i]);
            }
        }
    }
}
