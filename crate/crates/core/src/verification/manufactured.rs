use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::ExactFields;

/// Governing operator used to derive a source term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Physics {
    /// `a.grad u - div(2 nu grad^s u) + grad p`
    Oseen { a: [f64; 2], nu: f64 },
    /// `d_t u + u.grad u - div(2 nu grad^s u) + grad p`
    NavierStokes { nu: f64 },
}

impl Physics {
    pub fn nu(&self) -> f64 {
        match *self {
            Physics::Oseen { nu, .. } | Physics::NavierStokes { nu } => nu,
        }
    }
}

/// Smooth exact solution with analytic derivatives and a committed source.
pub trait ManufacturedSolution: Sync {
    fn name(&self) -> &'static str;
    fn origin(&self) -> [f64; 2];
    fn extent(&self) -> [f64; 2];
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// `g[i][j] = d_j u_i`
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    /// `[xx, xy, yy]` second derivatives of each component.
    fn velocity_hessian(&self, x: [f64; 2], t: f64) -> [[f64; 3]; 2];
    fn velocity_time_derivative(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn pressure(&self, x: [f64; 2], t: f64) -> f64;
    fn pressure_gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn pressure_mean(&self, t: f64) -> f64;
    fn source(&self, x: [f64; 2], t: f64, physics: Physics) -> [f64; 2];

    /// `lap u + grad div u`
    fn viscous_operator(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let h = self.velocity_hessian(x, t);
        [
            h[0][0] + h[0][2] + h[0][0] + h[1][1],
            h[1][0] + h[1][2] + h[0][1] + h[1][2],
        ]
    }

    fn divergence(&self, x: [f64; 2], t: f64) -> f64 {
        let g = self.velocity_gradient(x, t);
        g[0][0] + g[1][1]
    }
}

/// Strong residual of the operator applied to the derivative callables,
/// minus the committed source.
pub fn operator_residual(s: &dyn ManufacturedSolution, x: [f64; 2], t: f64, physics: Physics) -> [f64; 2] {
    let u = s.velocity(x, t);
    let g = s.velocity_gradient(x, t);
    let vis = s.viscous_operator(x, t);
    let gp = s.pressure_gradient(x, t);
    let f = s.source(x, t, physics);
    let (adv, dt) = match physics {
        Physics::Oseen { a, .. } => (a, [0.0; 2]),
        Physics::NavierStokes { .. } => (u, s.velocity_time_derivative(x, t)),
    };
    let nu = physics.nu();
    std::array::from_fn(|c| dt[c] + g[c][0] * adv[0] + g[c][1] * adv[1] - nu * vis[c] + gp[c] - f[c])
}

/// Largest operator and divergence residual over `n` random points (and
/// times in `[0, 1]`).
pub fn self_check(s: &dyn ManufacturedSolution, physics: Physics, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (o, e) = (s.origin(), s.extent());
    let mut worst = 0.0f64;
    for _ in 0..n {
        let x = [o[0] + e[0] * rng.gen::<f64>(), o[1] + e[1] * rng.gen::<f64>()];
        let t = rng.gen::<f64>();
        let r = operator_residual(s, x, t, physics);
        worst = worst.max(r[0].abs()).max(r[1].abs()).max(s.divergence(x, t).abs());
    }
    worst
}

pub const SELF_CHECK_TOLERANCE: f64 = 1e-10;

fn checked<S: ManufacturedSolution>(s: S, physics: &[Physics]) -> Result<S> {
    for &p in physics {
        let r = self_check(&s, p, 100, 0x5eed);
        if !(r <= SELF_CHECK_TOLERANCE) {
            return Err(Error::Configuration(format!("{}: source self-check residual {r:e} for {p:?}", s.name())));
        }
    }
    Ok(s)
}

/// Regularized lid-driven cavity on the unit square with velocity
/// `u1 = 8 x^2 y (x^2 - 2x + 1)(4y^2 - 2)`,
/// `u2 = -16 x y^2 (2x^2 - 3x + 1)(y^2 - 1)` and `p = sin(pi x) sin(pi y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegularizedCavity;

pub fn regularized_cavity() -> Result<RegularizedCavity> {
    let a = [3f64.sqrt() / 2.0, 0.5];
    checked(RegularizedCavity, &[
        Physics::Oseen { a, nu: 0.005 },
        Physics::Oseen { a: [0.3, -1.7], nu: 2.0 },
        Physics::NavierStokes { nu: 0.01 },
        Physics::NavierStokes { nu: 1.0 },
    ])
}

impl ManufacturedSolution for RegularizedCavity {
    fn name(&self) -> &'static str {
        "regularized-cavity"
    }

    fn origin(&self) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn extent(&self) -> [f64; 2] {
        [1.0, 1.0]
    }

    fn velocity(&self, p: [f64; 2], _t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        [
            8.0 * x * x * y * (x * x - 2.0 * x + 1.0) * (4.0 * y * y - 2.0),
            -16.0 * x * y * y * (2.0 * x * x - 3.0 * x + 1.0) * (y * y - 1.0),
        ]
    }

    fn velocity_gradient(&self, p: [f64; 2], _t: f64) -> [[f64; 2]; 2] {
        let (x, y) = (p[0], p[1]);
        let (x2, x3, y2, y3) = (x * x, x * x * x, y * y, y * y * y);
        let (x4, y4) = (x2 * x2, y2 * y2);
        [
            [
                -32.0 * x * y + 64.0 * x * y3 + 96.0 * x2 * y - 192.0 * x2 * y3 - 64.0 * x3 * y + 128.0 * x3 * y3,
                -16.0 * x2 + 32.0 * x3 - 16.0 * x4 + 96.0 * x2 * y2 - 192.0 * x3 * y2 + 96.0 * x4 * y2,
            ],
            [
                16.0 * y2 - 16.0 * y4 - 96.0 * x * y2 + 96.0 * x * y4 + 96.0 * x2 * y2 - 96.0 * x2 * y4,
                32.0 * x * y - 64.0 * x * y3 - 96.0 * x2 * y + 192.0 * x2 * y3 + 64.0 * x3 * y - 128.0 * x3 * y3,
            ],
        ]
    }

    fn velocity_hessian(&self, p: [f64; 2], _t: f64) -> [[f64; 3]; 2] {
        let (x, y) = (p[0], p[1]);
        let (x2, x3, y2, y3) = (x * x, x * x * x, y * y, y * y * y);
        let y4 = y2 * y2;
        [
            [
                -32.0 * y + 64.0 * y3 + 192.0 * x * y - 384.0 * x * y3 - 192.0 * x2 * y + 384.0 * x2 * y3,
                -32.0 * x + 96.0 * x2 - 64.0 * x3 + 192.0 * x * y2 - 576.0 * x2 * y2 + 384.0 * x3 * y2,
                192.0 * x2 * y - 384.0 * x3 * y + 192.0 * x2 * x2 * y,
            ],
            [
                -96.0 * y2 + 96.0 * y4 + 192.0 * x * y2 - 192.0 * x * y4,
                32.0 * y - 64.0 * y3 - 192.0 * x * y + 384.0 * x * y3 + 192.0 * x2 * y - 384.0 * x2 * y3,
                32.0 * x - 96.0 * x2 + 64.0 * x3 - 192.0 * x * y2 + 576.0 * x2 * y2 - 384.0 * x3 * y2,
            ],
        ]
    }

    fn velocity_time_derivative(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0; 2]
    }

    fn pressure(&self, p: [f64; 2], _t: f64) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }

    fn pressure_gradient(&self, p: [f64; 2], _t: f64) -> [f64; 2] {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [PI * cx * sy, PI * sx * cy]
    }

    fn pressure_mean(&self, _t: f64) -> f64 {
        4.0 / (PI * PI)
    }

    fn source(&self, p: [f64; 2], _t: f64, physics: Physics) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        let (x2, x3, y2, y3) = (x * x, x * x * x, y * y, y * y * y);
        let (x4, y4) = (x2 * x2, y2 * y2);
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        match physics {
            Physics::Oseen { a, nu } => {
                let (a1, a2) = (a[0], a[1]);
                [
                    -16.0 * a2 * x2 + 32.0 * a2 * x3 - 16.0 * a2 * x4 + 32.0 * nu * y - 64.0 * nu * y3
                        + PI * sy * cx
                        - 32.0 * a1 * x * y
                        + 64.0 * a1 * x * y3
                        + 96.0 * a1 * x2 * y
                        - 192.0 * a1 * x2 * y3
                        - 64.0 * a1 * x3 * y
                        + 128.0 * a1 * x3 * y3
                        + 96.0 * a2 * x2 * y2
                        - 192.0 * a2 * x3 * y2
                        + 96.0 * a2 * x4 * y2
                        - 192.0 * nu * x * y
                        + 384.0 * nu * x * y3
                        - 384.0 * nu * x2 * y3
                        + 384.0 * nu * x3 * y
                        - 192.0 * nu * x4 * y,
                    16.0 * a1 * y2 - 16.0 * a1 * y4 - 32.0 * nu * x + 96.0 * nu * x2 - 64.0 * nu * x3
                        + 96.0 * nu * y2
                        - 96.0 * nu * y4
                        + PI * sx * cy
                        - 96.0 * a1 * x * y2
                        + 96.0 * a1 * x * y4
                        + 96.0 * a1 * x2 * y2
                        - 96.0 * a1 * x2 * y4
                        + 32.0 * a2 * x * y
                        - 64.0 * a2 * x * y3
                        - 96.0 * a2 * x2 * y
                        + 192.0 * a2 * x2 * y3
                        + 64.0 * a2 * x3 * y
                        - 128.0 * a2 * x3 * y3
                        + 192.0 * nu * x * y4
                        - 576.0 * nu * x2 * y2
                        + 384.0 * nu * x3 * y2,
                ]
            }
            Physics::NavierStokes { nu } => {
                let (x5, x6, x7) = (x4 * x, x4 * x2, x4 * x3);
                let (y5, y6, y7) = (y4 * y, y4 * y2, y4 * y3);
                [
                    32.0 * nu * y - 64.0 * nu * y3 + 256.0 * x3 * y2 - 256.0 * x3 * y4 + 512.0 * x3 * y6
                        - 1280.0 * x4 * y2
                        + 1280.0 * x4 * y4
                        - 2560.0 * x4 * y6
                        + 2304.0 * x5 * y2
                        - 2304.0 * x5 * y4
                        + 4608.0 * x5 * y6
                        - 1792.0 * x6 * y2
                        + 1792.0 * x6 * y4
                        - 3584.0 * x6 * y6
                        + 512.0 * x7 * y2
                        - 512.0 * x7 * y4
                        + 1024.0 * x7 * y6
                        + PI * sy * cx
                        - 192.0 * nu * x * y
                        + 384.0 * nu * x * y3
                        - 384.0 * nu * x2 * y3
                        + 384.0 * nu * x3 * y
                        - 192.0 * nu * x4 * y,
                    -32.0 * nu * x + 96.0 * nu * x2 - 64.0 * nu * x3 + 96.0 * nu * y2 - 96.0 * nu * y4
                        + 256.0 * x2 * y3
                        - 768.0 * x2 * y5
                        + 512.0 * x2 * y7
                        - 1024.0 * x3 * y3
                        + 3072.0 * x3 * y5
                        - 2048.0 * x3 * y7
                        + 1792.0 * x4 * y3
                        - 5376.0 * x4 * y5
                        + 3584.0 * x4 * y7
                        - 1536.0 * x5 * y3
                        + 4608.0 * x5 * y5
                        - 3072.0 * x5 * y7
                        + 512.0 * x6 * y3
                        - 1536.0 * x6 * y5
                        + 1024.0 * x6 * y7
                        + PI * sx * cy
                        + 192.0 * nu * x * y4
                        - 576.0 * nu * x2 * y2
                        + 384.0 * nu * x3 * y2,
                ]
            }
        }
    }
}

/// Decaying Taylor-Green vortex on `[-pi, pi]^2`; an exact Navier-Stokes
/// solution with zero body force.
#[derive(Debug, Clone, Copy)]
pub struct TaylorGreen {
    pub nu: f64,
}

pub fn taylor_green(nu: f64) -> Result<TaylorGreen> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("viscosity must be positive, got {nu}")));
    }
    checked(TaylorGreen { nu }, &[Physics::NavierStokes { nu }])
}

impl TaylorGreen {
    fn decay(&self, t: f64) -> f64 {
        (-2.0 * self.nu * t).exp()
    }

    /// `||u(., t)||^2 = 2 pi^2 exp(-4 nu t)`
    pub fn kinetic_energy(&self, t: f64) -> f64 {
        PI * PI * (-4.0 * self.nu * t).exp()
    }
}

impl ManufacturedSolution for TaylorGreen {
    fn name(&self) -> &'static str {
        "taylor-green"
    }

    fn origin(&self) -> [f64; 2] {
        [-PI, -PI]
    }

    fn extent(&self) -> [f64; 2] {
        [2.0 * PI, 2.0 * PI]
    }

    fn velocity(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (sx, cx) = p[0].sin_cos();
        let (sy, cy) = p[1].sin_cos();
        let e = self.decay(t);
        [sx * cy * e, -cx * sy * e]
    }

    fn velocity_gradient(&self, p: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let (sx, cx) = p[0].sin_cos();
        let (sy, cy) = p[1].sin_cos();
        let e = self.decay(t);
        [[cx * cy * e, -sx * sy * e], [sx * sy * e, -cx * cy * e]]
    }

    fn velocity_hessian(&self, p: [f64; 2], t: f64) -> [[f64; 3]; 2] {
        let (sx, cx) = p[0].sin_cos();
        let (sy, cy) = p[1].sin_cos();
        let e = self.decay(t);
        [[-sx * cy * e, -cx * sy * e, -sx * cy * e], [cx * sy * e, sx * cy * e, cx * sy * e]]
    }

    fn velocity_time_derivative(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let u = self.velocity(p, t);
        [-2.0 * self.nu * u[0], -2.0 * self.nu * u[1]]
    }

    fn pressure(&self, p: [f64; 2], t: f64) -> f64 {
        0.25 * ((2.0 * p[0]).cos() + (2.0 * p[1]).cos()) * self.decay(2.0 * t)
    }

    fn pressure_gradient(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let e = self.decay(2.0 * t);
        [-0.5 * (2.0 * p[0]).sin() * e, -0.5 * (2.0 * p[1]).sin() * e]
    }

    fn pressure_mean(&self, _t: f64) -> f64 {
        0.0
    }

    fn source(&self, x: [f64; 2], t: f64, physics: Physics) -> [f64; 2] {
        match physics {
            Physics::NavierStokes { nu } if nu == self.nu => [0.0; 2],
            // any other operator: build the source from the derivatives
            _ => {
                let zero = ZeroSource(self);
                let r = operator_residual(&zero, x, t, physics);
                r
            }
        }
    }
}

struct ZeroSource<'a, S: ManufacturedSolution>(&'a S);

impl<S: ManufacturedSolution> ManufacturedSolution for ZeroSource<'_, S> {
    fn name(&self) -> &'static str {
        self.0.name()
    }
    fn origin(&self) -> [f64; 2] {
        self.0.origin()
    }
    fn extent(&self) -> [f64; 2] {
        self.0.extent()
    }
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.0.velocity(x, t)
    }
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        self.0.velocity_gradient(x, t)
    }
    fn velocity_hessian(&self, x: [f64; 2], t: f64) -> [[f64; 3]; 2] {
        self.0.velocity_hessian(x, t)
    }
    fn velocity_time_derivative(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.0.velocity_time_derivative(x, t)
    }
    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.0.pressure(x, t)
    }
    fn pressure_gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.0.pressure_gradient(x, t)
    }
    fn pressure_mean(&self, t: f64) -> f64 {
        self.0.pressure_mean(t)
    }
    fn source(&self, _x: [f64; 2], _t: f64, _physics: Physics) -> [f64; 2] {
        [0.0; 2]
    }
}

/// Snapshot of a manufactured solution as [`ExactFields`]; the pressure may
/// be sampled at a different time than the velocity (midpoint pressures).
pub struct ExactAt<'a> {
    pub solution: &'a dyn ManufacturedSolution,
    pub velocity_time: f64,
    pub pressure_time: f64,
}

impl<'a> ExactAt<'a> {
    pub fn new(solution: &'a dyn ManufacturedSolution, t: f64) -> Self {
        Self { solution, velocity_time: t, pressure_time: t }
    }
}

impl ExactFields for ExactAt<'_> {
    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.solution.velocity(x, self.velocity_time)
    }
    fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.solution.velocity_gradient(x, self.velocity_time)
    }
    fn viscous_operator(&self, x: [f64; 2]) -> [f64; 2] {
        self.solution.viscous_operator(x, self.velocity_time)
    }
    fn pressure(&self, x: [f64; 2]) -> f64 {
        self.solution.pressure(x, self.pressure_time)
    }
    fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.solution.pressure_gradient(x, self.pressure_time)
    }
    fn pressure_mean(&self) -> f64 {
        self.solution.pressure_mean(self.pressure_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(s: &dyn ManufacturedSolution, x: [f64; 2], t: f64) {
        let e = 1e-5;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += e;
            xm[j] -= e;
            let (up, um) = (s.velocity(xp, t), s.velocity(xm, t));
            let (gp, gm) = (s.velocity_gradient(xp, t), s.velocity_gradient(xm, t));
            let g = s.velocity_gradient(x, t);
            let h = s.velocity_hessian(x, t);
            for i in 0..2 {
                let d = (up[i] - um[i]) / (2.0 * e);
                assert!((d - g[i][j]).abs() < 1e-7 * g[i][j].abs().max(1.0), "grad u{i} d{j}");
                // d_j of (d_0 u_i) is h[i][j]; d_j of (d_1 u_i) is h[i][1 + j]
                let d0 = (gp[i][0] - gm[i][0]) / (2.0 * e);
                let d1 = (gp[i][1] - gm[i][1]) / (2.0 * e);
                assert!((d0 - h[i][j]).abs() < 1e-6 * h[i][j].abs().max(1.0));
                assert!((d1 - h[i][1 + j]).abs() < 1e-6 * h[i][1 + j].abs().max(1.0));
            }
            let pp = s.pressure(xp, t) - s.pressure(xm, t);
            let gpr = s.pressure_gradient(x, t);
            assert!((pp / (2.0 * e) - gpr[j]).abs() < 1e-7);
        }
        let et = 1e-6;
        let dt = s.velocity_time_derivative(x, t);
        let (up, um) = (s.velocity(x, t + et), s.velocity(x, t - et));
        for i in 0..2 {
            assert!(((up[i] - um[i]) / (2.0 * et) - dt[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = regularized_cavity().unwrap();
        let tg = taylor_green(0.01).unwrap();
        for &x in &[[0.13, 0.71], [0.5, 0.5], [0.92, 0.08]] {
            fd_check(&c, x, 0.0);
            fd_check(&tg, [x[0] * 6.0 - 3.0, x[1] * 6.0 - 3.0], 0.3);
        }
    }

    #[test]
    fn cavity_source_closes_operator_built_from_finite_differences() {
        // Independent of the analytic derivative callables: gradient and
        // viscous term from nested central differences of the velocity.
        let c = RegularizedCavity;
        let nu = 0.005;
        let a = [3f64.sqrt() / 2.0, 0.5];
        let e = 1e-4;
        let u = |x: [f64; 2]| c.velocity(x, 0.0);
        for &x in &[[0.21, 0.37], [0.66, 0.81]] {
            let d = |f: &dyn Fn([f64; 2]) -> [f64; 2], j: usize, x: [f64; 2]| -> [f64; 2] {
                let mut xp = x;
                let mut xm = x;
                xp[j] += e;
                xm[j] -= e;
                let (a, b) = (f(xp), f(xm));
                [(a[0] - b[0]) / (2.0 * e), (a[1] - b[1]) / (2.0 * e)]
            };
            let dx = |x: [f64; 2]| d(&u, 0, x);
            let dy = |x: [f64; 2]| d(&u, 1, x);
            let (ux, uy) = (dx(x), dy(x));
            let (uxx, uyy, uxy) = (d(&dx, 0, x), d(&dy, 1, x), d(&dx, 1, x));
            let gp = c.pressure_gradient(x, 0.0);
            let f = c.source(x, 0.0, Physics::Oseen { a, nu });
            let fn_ = c.source(x, 0.0, Physics::NavierStokes { nu });
            let uu = u(x);
            for i in 0..2 {
                let lap = uxx[i] + uyy[i];
                // d_i div u
                let gdiv = if i == 0 { uxx[0] + uxy[1] } else { uxy[0] + uyy[1] };
                let visc = nu * (lap + gdiv);
                let oseen = a[0] * ux[i] + a[1] * uy[i] - visc + gp[i];
                let ns = uu[0] * ux[i] + uu[1] * uy[i] - visc + gp[i];
                assert!((oseen - f[i]).abs() < 1e-5, "oseen {i}: {oseen} vs {}", f[i]);
                assert!((ns - fn_[i]).abs() < 1e-5, "ns {i}: {ns} vs {}", fn_[i]);
            }
        }
    }

    #[test]
    fn self_checks_pass() {
        let c = regularized_cavity().unwrap();
        assert!(self_check(&c, Physics::NavierStokes { nu: 0.01 }, 100, 7) <= SELF_CHECK_TOLERANCE);
        let tg = taylor_green(0.01).unwrap();
        assert!(self_check(&tg, Physics::NavierStokes { nu: 0.01 }, 100, 7) <= SELF_CHECK_TOLERANCE);
    }

    #[test]
    fn cavity_values() {
        let c = RegularizedCavity;
        assert!((c.pressure([0.5, 0.5], 0.0) - 1.0).abs() < 1e-15);
        for s in 0..=10 {
            let v = s as f64 / 10.0;
            assert_eq!(c.velocity([0.0, v], 0.0), [0.0, 0.0]);
            assert_eq!(c.velocity([v, 0.0], 0.0), [0.0, 0.0]);
        }
        // lid: u = (1, 0) at the top midpoint
        let top = c.velocity([0.5, 1.0], 0.0);
        assert!((top[0] - 1.0).abs() < 1e-15 && top[1].abs() < 1e-15);
    }

    #[test]
    fn taylor_green_energy_by_quadrature() {
        let tg = taylor_green(0.01).unwrap();
        let (x, w) = crate::discretization::quadrature::gauss_legendre(40);
        let t = 0.7;
        let mut s = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                let u = tg.velocity([PI * x[i], PI * x[j]], t);
                s += PI * PI * w[i] * w[j] * (u[0] * u[0] + u[1] * u[1]);
            }
        }
        assert!((s - 2.0 * PI * PI * (-0.04 * t).exp()).abs() < 1e-12);
        assert!((0.5 * s - tg.kinetic_energy(t)).abs() < 1e-12);
    }

    #[test]
    fn broken_source_is_rejected() {
        struct Bad;
        impl ManufacturedSolution for Bad {
            fn name(&self) -> &'static str { "bad" }
            fn origin(&self) -> [f64; 2] { [0.0; 2] }
            fn extent(&self) -> [f64; 2] { [1.0; 2] }
            fn velocity(&self, x: [f64; 2], _: f64) -> [f64; 2] { RegularizedCavity.velocity(x, 0.0) }
            fn velocity_gradient(&self, x: [f64; 2], _: f64) -> [[f64; 2]; 2] { RegularizedCavity.velocity_gradient(x, 0.0) }
            fn velocity_hessian(&self, x: [f64; 2], _: f64) -> [[f64; 3]; 2] { RegularizedCavity.velocity_hessian(x, 0.0) }
            fn velocity_time_derivative(&self, _: [f64; 2], _: f64) -> [f64; 2] { [0.0; 2] }
            fn pressure(&self, x: [f64; 2], _: f64) -> f64 { RegularizedCavity.pressure(x, 0.0) }
            fn pressure_gradient(&self, x: [f64; 2], _: f64) -> [f64; 2] { RegularizedCavity.pressure_gradient(x, 0.0) }
            fn pressure_mean(&self, _: f64) -> f64 { 0.0 }
            fn source(&self, x: [f64; 2], t: f64, p: Physics) -> [f64; 2] {
                let f = RegularizedCavity.source(x, t, p);
                [f[0] + 1e-6, f[1]]
            }
        }
        assert!(checked(Bad, &[Physics::NavierStokes { nu: 0.01 }]).is_err());
    }
}
