use rayon::prelude::*;

use super::{tau_sharp, FlowParameters};
use crate::discretization::{MixedSpace, QuadraturePurpose, Tabulation, Tabulator};
use crate::error::{Error, Result};

/// Smooth reference solution for error measurement.
pub trait ExactFields: Sync {
    fn velocity(&self, x: [f64; 2]) -> [f64; 2];
    /// `g[i][j] = d_j u_i`
    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2];
    /// `lap u + grad div u`
    fn viscous_operator(&self, x: [f64; 2]) -> [f64; 2];
    fn pressure(&self, x: [f64; 2]) -> f64;
    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2];
    /// Mean of the exact pressure over the domain, removed before comparing
    /// with the zero-mean discrete pressure.
    fn pressure_mean(&self) -> f64 {
        0.0
    }
}

/// Weights of the stability norm.
#[derive(Debug, Clone, Copy)]
pub enum NormWeights {
    /// Sharp parameters with the constant advection of the problem.
    Oseen(FlowParameters),
    /// Sharp parameters with the exact velocity as the pointwise advection;
    /// `alpha` uses unit speed and unit length.
    NavierStokes { nu: f64, c_inv: f64 },
}

/// Error norms (not squared).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormTerms {
    /// `|u - u_h|_1`
    pub h1_u: f64,
    pub l2_u: f64,
    /// `||(p - mean p) - p_h||`
    pub l2_p: f64,
    pub triple: f64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    h1: f64,
    l2u: f64,
    l2p: f64,
    triple: f64,
}

impl std::ops::Add for Sums {
    type Output = Sums;
    fn add(self, o: Sums) -> Sums {
        Sums { h1: self.h1 + o.h1, l2u: self.l2u + o.l2u, l2p: self.l2p + o.l2p, triple: self.triple + o.triple }
    }
}

/// Velocity and pressure errors of a mixed coefficient vector against an
/// exact solution, with the stability ("triple") norm
/// `2 nu ||grad^s e||^2 + alpha ||p - p_h||^2 + tau_C ||div u_h||^2
///  + tau_M ||a.grad e + grad(p - p~)||^2 + tau_M ||div(2 nu grad^s e)||^2`.
pub fn error_norm_terms(space: &MixedSpace, x: &[f64], exact: &dyn ExactFields, weights: NormWeights) -> Result<NormTerms> {
    let l = space.layout();
    if x.len() != l.total() {
        return Err(Error::DimensionMismatch("coefficient vector does not match the mixed space".into()));
    }
    let h = space.mesh().h();
    let (nu, c_inv, alpha) = match weights {
        NormWeights::Oseen(p) => (p.nu, p.c_inv, p.alpha(h)),
        NormWeights::NavierStokes { nu, c_inv } => {
            let unit = FlowParameters::new(nu, [1.0, 0.0], c_inv, 1.0)?;
            (nu, c_inv, unit.alpha(h))
        }
    };
    let rule = space.quadrature_for(QuadraturePurpose::Error);
    let tv_ = Tabulator::new(&space.velocity, rule.clone());
    let tp_ = Tabulator::new(&space.pressure, rule);
    let p_mean = exact.pressure_mean();

    let sums = (0..space.n_elements())
        .into_par_iter()
        .map_init(
            || (Tabulation::default(), Tabulation::default()),
            |(tv, tp), e| -> Result<Sums> {
                tv_.tabulate(e, tv)?;
                tp_.tabulate(e, tp)?;
                let vd = space.velocity.element_dofs(e);
                let pd = space.pressure.element_dofs(e);
                let mut s = Sums::default();
                for q in 0..tv.n_points {
                    let w = tv.jxw[q];
                    let pt = tv.points[q];
                    let mut uh = [0.0; 2];
                    let mut guh = [[0.0; 2]; 2];
                    let mut vish = [0.0; 2];
                    for (a, &d) in vd.iter().enumerate() {
                        let n = tv.val(q, a);
                        let g = tv.grad(q, a);
                        let hh = tv.hess(q, a);
                        let hm = [[hh[0], hh[1]], [hh[1], hh[2]]];
                        for c in 0..2 {
                            let coef = x[l.velocity(c, d)];
                            uh[c] += coef * n;
                            guh[c][0] += coef * g[0];
                            guh[c][1] += coef * g[1];
                            for i in 0..2 {
                                let lap = if i == c { hh[0] + hh[2] } else { 0.0 };
                                vish[i] += coef * (lap + hm[i][c]);
                            }
                        }
                    }
                    let mut ph = 0.0;
                    let mut gpt = [0.0; 2];
                    for (m, &d) in pd.iter().enumerate() {
                        ph += x[l.pressure(d)] * tp.val(q, m);
                        let g = tp.grad(q, m);
                        let c = x[l.fine_pressure(d)];
                        gpt[0] += c * g[0];
                        gpt[1] += c * g[1];
                    }
                    let u = exact.velocity(pt);
                    let gu = exact.velocity_gradient(pt);
                    let vis = exact.viscous_operator(pt);
                    let gp = exact.pressure_gradient(pt);
                    let ep = exact.pressure(pt) - p_mean - ph;

                    let eu = [u[0] - uh[0], u[1] - uh[1]];
                    let ge = [[gu[0][0] - guh[0][0], gu[0][1] - guh[0][1]], [gu[1][0] - guh[1][0], gu[1][1] - guh[1][1]]];
                    let h1: f64 = ge.iter().flatten().map(|v| v * v).sum();
                    let mut sym = 0.0;
                    for i in 0..2 {
                        for j in 0..2 {
                            let v = 0.5 * (ge[i][j] + ge[j][i]);
                            sym += v * v;
                        }
                    }
                    let adv = match weights {
                        NormWeights::Oseen(p) => p.a,
                        NormWeights::NavierStokes { .. } => u,
                    };
                    let st = tau_sharp(adv, nu, c_inv, h);
                    let div_h = guh[0][0] + guh[1][1];
                    let mut strong = 0.0;
                    let mut visc = 0.0;
                    for c in 0..2 {
                        let r = adv[0] * ge[c][0] + adv[1] * ge[c][1] + gp[c] - gpt[c];
                        strong += r * r;
                        let v = nu * (vis[c] - vish[c]);
                        visc += v * v;
                    }
                    s.h1 += w * h1;
                    s.l2u += w * (eu[0] * eu[0] + eu[1] * eu[1]);
                    s.l2p += w * ep * ep;
                    s.triple += w
                        * (2.0 * nu * sym + alpha * ep * ep + st.tau_c * div_h * div_h + st.tau_m * (strong + visc));
                }
                Ok(s)
            },
        )
        .try_reduce(Sums::default, |a, b| Ok(a + b))?;
    Ok(NormTerms { h1_u: sums.h1.sqrt(), l2_u: sums.l2u.sqrt(), l2_p: sums.l2p.sqrt(), triple: sums.triple.sqrt() })
}
