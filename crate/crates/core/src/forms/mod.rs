//! Weak forms, stabilization parameters and element kernels.

mod norms;
mod ns;
mod oseen;

pub use norms::{error_norm_terms, ExactFields, NormTerms, NormWeights};
pub use ns::{element_ns, ns_pointwise, subscale_samples, NsKernel, NsMode, NsScratch, PointOutput, PointParams, PointState, TimeSourceFn};
pub use oseen::{element_oseen, OseenKernel, OseenScratch, SourceFn};

use crate::error::{Error, Result};

/// Physical and stabilization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParameters {
    pub nu: f64,
    /// Constant advection velocity (Oseen only).
    pub a: [f64; 2],
    pub c_inv: f64,
    /// Global length scale used in the Peclet numbers.
    pub length: f64,
}

pub const DEFAULT_C_INV: f64 = 36.0;

impl FlowParameters {
    pub fn new(nu: f64, a: [f64; 2], c_inv: f64, length: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("viscosity must be positive, got {nu}")));
        }
        if !(c_inv > 0.0) {
            return Err(Error::InvalidInput(format!("C_inv must be positive, got {c_inv}")));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidInput(format!("length scale must be positive, got {length}")));
        }
        Ok(Self { nu, a, c_inv, length })
    }

    pub fn speed(&self) -> f64 {
        norm(self.a)
    }

    /// Global Peclet number `|a| L / (2 nu)`.
    pub fn peclet(&self) -> f64 {
        self.speed() * self.length / (2.0 * self.nu)
    }

    /// Element Peclet number `|a| h / (2 nu)`.
    pub fn element_peclet(&self, h: f64) -> f64 {
        self.speed() * h / (2.0 * self.nu)
    }

    /// Pressure weight `nu^{-1} min{1, Pe^{-2}, Pe_h^{-1}}` of the stability norm.
    pub fn alpha(&self, h: f64) -> f64 {
        let pe = self.peclet();
        let peh = self.element_peclet(h);
        let m = 1.0f64.min(pe.powi(-2)).min(1.0 / peh);
        m / self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabVariant {
    SharpOseen,
    Smoothed,
    SmoothedUnsteady,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabEval {
    pub tau_m: f64,
    pub tau_c: f64,
    pub variant: StabVariant,
}

impl StabEval {
    pub fn off() -> Self {
        Self { tau_m: 0.0, tau_c: 0.0, variant: StabVariant::Off }
    }
}

pub(crate) fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Sharp parameters with a constant advection field.
pub fn tau_oseen(params: &FlowParameters, h: f64) -> StabEval {
    tau_sharp(params.a, params.nu, params.c_inv, h)
}

/// `tau_M = min{h/(2|u|), h^2/(C_inv nu)}`, `tau_C = max{h|u|, nu}`.
pub fn tau_sharp(u: [f64; 2], nu: f64, c_inv: f64, h: f64) -> StabEval {
    let speed = norm(u);
    let diffusive = h * h / (c_inv * nu);
    let tau_m = if speed > 0.0 { (h / (2.0 * speed)).min(diffusive) } else { diffusive };
    StabEval { tau_m, tau_c: (h * speed).max(nu), variant: StabVariant::SharpOseen }
}

/// Sharp quasi-static parameters for a time step `dt`: `tau_M` is further
/// capped by `dt/2`.
pub fn tau_sharp_quasistatic(u: [f64; 2], nu: f64, c_inv: f64, h: f64, dt: f64) -> StabEval {
    let s = tau_sharp(u, nu, c_inv, h);
    StabEval { tau_m: s.tau_m.min(0.5 * dt), ..s }
}

/// Smoothed parameters from the element metric `G`; `dt` adds the `4/dt^2`
/// term of the unsteady variant.
pub fn tau_smoothed(u: [f64; 2], g: &[[f64; 2]; 2], nu: f64, c_inv: f64, dt: Option<f64>) -> Result<StabEval> {
    let kappa = dt.map_or(0.0, |dt| 4.0 / (dt * dt));
    let ugu = quad_form(g, u);
    let gg = g[0][0] * g[0][0] + 2.0 * g[0][1] * g[1][0] + g[1][1] * g[1][1];
    let denom = kappa + ugu + c_inv * c_inv * nu * nu * gg;
    if !(denom > 0.0) {
        return Err(Error::Configuration(
            "smoothed tau_M is undefined: zero velocity, zero viscosity and no time step".into(),
        ));
    }
    let tau_m = denom.powf(-0.5);
    let tau_c = 1.0 / (tau_m * (g[0][0] + g[1][1]));
    let variant = if dt.is_some() { StabVariant::SmoothedUnsteady } else { StabVariant::Smoothed };
    Ok(StabEval { tau_m, tau_c, variant })
}

fn quad_form(g: &[[f64; 2]; 2], u: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += u[i] * g[i][j] * u[j];
        }
    }
    s
}

/// Pointwise integrand of `c(w, u, v) = (w . grad u) . v`; gradients are
/// `g[i][j] = d_j u_i`.
pub fn c_point(w: [f64; 2], gu: [[f64; 2]; 2], v: [f64; 2]) -> f64 {
    (0..2).map(|i| (gu[i][0] * w[0] + gu[i][1] * w[1]) * v[i]).sum()
}

/// Pointwise integrand of `c_cons(w, u, v) = -u . (w . grad v)`.
pub fn c_cons_point(w: [f64; 2], u: [f64; 2], gv: [[f64; 2]; 2]) -> f64 {
    -(0..2).map(|i| u[i] * (gv[i][0] * w[0] + gv[i][1] * w[1])).sum::<f64>()
}

/// Pointwise integrand of `c_skew = (c + c_cons) / 2`.
pub fn c_skew_point(w: [f64; 2], u: [f64; 2], gu: [[f64; 2]; 2], v: [f64; 2], gv: [[f64; 2]; 2]) -> f64 {
    0.5 * (c_point(w, gu, v) + c_cons_point(w, u, gv))
}

/// Dynamic subscale at one point:
/// `u'_n = M^{-1}(-r + ((1/dt - 1/(2 tau))I - grad u / 2) u'_{n-1})` with
/// `M = (1/dt + 1/(2 tau))I + grad u / 2`, where `r` already contains the fine
/// pressure gradient. Returns `None` if `M` is singular.
pub fn subscale_update(r: [f64; 2], grad_u: [[f64; 2]; 2], u_old: [f64; 2], tau_m: f64, dt: f64) -> Option<[f64; 2]> {
    let a = 1.0 / dt + 0.5 / tau_m;
    let b = 1.0 / dt - 0.5 / tau_m;
    let m = [
        [a + 0.5 * grad_u[0][0], 0.5 * grad_u[0][1]],
        [0.5 * grad_u[1][0], a + 0.5 * grad_u[1][1]],
    ];
    let rhs = [
        -r[0] + b * u_old[0] - 0.5 * (grad_u[0][0] * u_old[0] + grad_u[0][1] * u_old[1]),
        -r[1] + b * u_old[1] - 0.5 * (grad_u[1][0] * u_old[0] + grad_u[1][1] * u_old[1]),
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn tau_oseen_advective_branch() {
        let p = FlowParameters::new(1e-8, [1.0, 0.0], 36.0, 1.0).unwrap();
        let s = tau_oseen(&p, 1.0 / 16.0);
        assert_eq!(s.tau_m, 1.0 / 32.0);
        assert_eq!(s.tau_c, 1.0 / 16.0);
    }

    #[test]
    fn tau_oseen_diffusive_branch() {
        let p = FlowParameters::new(1.0, [0.0, 1.0], 36.0, 1.0).unwrap();
        let h = 1.0 / 16.0;
        let s = tau_oseen(&p, h);
        assert_eq!(s.tau_m, h * h / 36.0);
        assert_eq!(s.tau_c, 1.0);
    }

    #[test]
    fn tau_oseen_zero_advection() {
        let p = FlowParameters::new(0.01, [0.0, 0.0], 36.0, 1.0).unwrap();
        let s = tau_oseen(&p, 0.1);
        assert_eq!(s.tau_m, 0.1 * 0.1 / 0.36);
        assert!(close(s.tau_m, 2.78e-2, 1e-3));
        assert_eq!(s.tau_c, 0.01);
    }

    #[test]
    fn tau_smoothed_diffusive_limit() {
        let h = 0.125;
        let g = [[4.0 / (h * h), 0.0], [0.0, 4.0 / (h * h)]];
        let nu = 0.01;
        let s = tau_smoothed([0.0, 0.0], &g, nu, 36.0, None).unwrap();
        let expect = h * h / (36.0 * nu * 32f64.sqrt());
        assert!(close(s.tau_m, expect, 1e-14));
        assert!(close(s.tau_c, 1.0 / (s.tau_m * 8.0 / (h * h)), 1e-14));
    }

    #[test]
    fn tau_smoothed_time_step_only() {
        let g = [[1.0, 0.0], [0.0, 1.0]];
        let s = tau_smoothed([0.0, 0.0], &g, 0.0, 36.0, Some(0.1)).unwrap();
        assert!(close(s.tau_m, 0.05, 1e-15));
        assert!(tau_smoothed([0.0, 0.0], &g, 0.0, 36.0, None).is_err());
    }

    #[test]
    fn tau_sharp_quasistatic_time_step_branch() {
        let s = tau_sharp_quasistatic([1.0, 0.0], 1e-3, 36.0, 0.1, 0.02);
        assert_eq!(s.tau_m, 0.01);
        assert_eq!(s.tau_c, 0.1);
        let s = tau_sharp_quasistatic([1.0, 0.0], 1e-3, 36.0, 0.1, 1.0);
        assert_eq!(s.tau_m, 0.05);
    }

    #[test]
    fn tau_smoothed_homogeneous_in_velocity() {
        let g = [[3.0, 0.5], [0.5, 2.0]];
        let a = tau_smoothed([0.3, -0.7], &g, 0.0, 36.0, None).unwrap();
        let b = tau_smoothed([0.6, -1.4], &g, 0.0, 36.0, None).unwrap();
        assert!(close(b.tau_m, 0.5 * a.tau_m, 1e-14));
    }

    #[test]
    fn alpha_example() {
        let p = FlowParameters::new(0.005, [3f64.sqrt() / 2.0, 0.5], 36.0, 1.0).unwrap();
        assert!(close(p.peclet(), 100.0, 1e-13));
        assert!(close(p.element_peclet(1.0 / 16.0), 6.25, 1e-13));
        assert!(close(p.alpha(1.0 / 16.0), 0.02, 1e-12));
    }

    #[test]
    fn subscale_scalar_case() {
        let (tau, dt) = (0.3, 0.1);
        let w = [0.7, -1.1];
        let u = subscale_update([0.0; 2], [[0.0; 2]; 2], w, tau, dt).unwrap();
        let f = (1.0 / dt - 0.5 / tau) / (1.0 / dt + 0.5 / tau);
        assert!(close(u[0], f * w[0], 1e-15) && close(u[1], f * w[1], 1e-15));
    }

    #[test]
    fn subscale_large_step_limit_is_quasi_static() {
        let r = [0.4, -0.2];
        let tau = 0.05;
        let u = subscale_update(r, [[0.0; 2]; 2], [0.0; 2], tau, 1e12).unwrap();
        // with u'_{n-1} = 0 the midpoint subscale is u'_n / 2
        for c in 0..2 {
            assert!(close(0.5 * u[c], -tau * r[c], 1e-9));
        }
    }

    #[test]
    fn c_skew_vanishes_on_diagonal() {
        let w = [0.3, -1.2];
        let u = [0.5, 2.0];
        let g = [[1.0, -0.4], [2.5, 0.7]];
        assert!(c_skew_point(w, u, g, u, g).abs() < 1e-15);
        // c_cons(w, u, v) = -c(w, v, u)
        let gv = [[0.2, 0.9], [-1.0, 0.3]];
        assert!((c_cons_point(w, u, gv) + c_point(w, gv, u)).abs() < 1e-15);
    }
}
