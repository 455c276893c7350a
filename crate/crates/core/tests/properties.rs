use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmsflow::forms::{c_skew_point, element_ns, subscale_update, tau_smoothed, NsKernel, NsMode};
use vmsflow::linalg::{assemble, SparsityPattern};
use vmsflow::verification::{build_space, fit_rate, ConvergenceReport, ConvergenceRow, ElementFamily};

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(-10.0..10.0f64)
}

fn mat2() -> impl Strategy<Value = [[f64; 2]; 2]> {
    prop::array::uniform2(prop::array::uniform2(-5.0..5.0f64))
}

/// Symmetric positive definite metric.
fn metric() -> impl Strategy<Value = [[f64; 2]; 2]> {
    (0.1..100.0f64, 0.1..100.0f64, -0.9..0.9f64).prop_map(|(a, b, c)| {
        let off = c * (a * b).sqrt();
        [[a, off], [off, b]]
    })
}

proptest! {
    #[test]
    fn fitted_rate_recovers_power_laws(c in 1e-3..1e3f64, r in 0.5..5.0f64, h0 in 0.05..0.5f64, n in 2usize..6) {
        let h: Vec<f64> = (0..n).map(|i| h0 / 2f64.powi(i as i32)).collect();
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(r)).collect();
        prop_assert!((fit_rate(&h, &e).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn convergence_csv_round_trips(errors in prop::collection::vec((1e-12..1e2f64, 1e-12..1e2f64, 1e-12..1e2f64, 0.0..1e3f64), 1..6)) {
        let mut report = ConvergenceReport::new("t");
        for (i, (a, b, c, w)) in errors.iter().enumerate() {
            let n = 4 << i;
            report.push(ConvergenceRow { n, h: 1.0 / n as f64, ndof: 7 * n * n, err_h1_u: *a, err_l2_p: *b, err_triple: *c, wall_s: *w }).unwrap();
        }
        let back = ConvergenceReport::from_csv("t", &report.to_csv()).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn smoothed_tau_relations(u in vec2(), g in metric(), nu in 1e-8..1.0f64, dt in prop::option::of(1e-4..1.0f64)) {
        let s = tau_smoothed(u, &g, nu, 36.0, dt).unwrap();
        prop_assert!((s.tau_c * s.tau_m * (g[0][0] + g[1][1]) - 1.0).abs() < 1e-12);
        if let Some(dt) = dt {
            prop_assert!(s.tau_m <= 0.5 * dt * (1.0 + 1e-14));
        }
        let faster = tau_smoothed([2.0 * u[0], 2.0 * u[1]], &g, nu, 36.0, dt).unwrap();
        prop_assert!(faster.tau_m <= s.tau_m);
    }

    #[test]
    fn skew_form_vanishes_on_the_diagonal(w in vec2(), u in vec2(), gu in mat2()) {
        let scale = 1.0 + w[0].abs().max(w[1].abs()) * u[0].abs().max(u[1].abs()) * 10.0;
        prop_assert!(c_skew_point(w, u, gu, u, gu).abs() <= 1e-14 * scale);
    }

    #[test]
    fn subscale_update_solves_the_uncondensed_system(r in vec2(), gu in mat2(), old in vec2(), tau in 1e-4..1.0f64, dt in 1e-4..1.0f64) {
        let a = 1.0 / dt + 0.5 / tau;
        let m = Matrix2::new(a + 0.5 * gu[0][0], 0.5 * gu[0][1], 0.5 * gu[1][0], a + 0.5 * gu[1][1]);
        prop_assume!(m.determinant().abs() > 1e-8 * a * a);
        let u = subscale_update(r, gu, old, tau, dt).unwrap();
        // (u_n - u_o)/dt + 1/2 grad u (u_n + u_o) + (u_n + u_o)/(2 tau) = -r
        let un = Vector2::new(u[0], u[1]);
        let uo = Vector2::new(old[0], old[1]);
        let g = Matrix2::new(gu[0][0], gu[0][1], gu[1][0], gu[1][1]);
        let lhs = (un - uo) / dt + g * (un + uo) * 0.5 + (un + uo) / (2.0 * tau);
        let scale = 1.0 + r[0].abs() + r[1].abs() + lhs.amax();
        prop_assert!((lhs + Vector2::new(r[0], r[1])).amax() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// `v^T C(w) v = 0` for the assembled advection operator frozen at `w`.
    #[test]
    fn assembled_skew_advection_is_antisymmetric(seed in any::<u64>(), spline in any::<bool>()) {
        let family = if spline { ElementFamily::SplineTaylorHood } else { ElementFamily::LagrangeTaylorHood };
        let space = build_space(family, 2, 2, [0.0; 2], [1.0; 2]).unwrap();
        let l = space.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; l.total()];
        let mut v = vec![0.0; l.total()];
        for c in 0..2 {
            for d in 0..l.n_velocity {
                w[l.velocity(c, d)] = rng.gen_range(-1.0..1.0);
                v[l.velocity(c, d)] = rng.gen_range(-1.0..1.0);
            }
        }
        let zero = |_: [f64; 2], _: f64| [0.0; 2];
        // nu = 0 and the Galerkin switch leave only the advection block
        let mut k = NsKernel::new(&space, 0.0, 36.0, NsMode::Steady, &zero, 0.0, &w, None, None).unwrap();
        k.galerkin = true;
        k.newton = false;
        let pattern = Arc::new(SparsityPattern::for_mixed(&space));
        let system = assemble(&pattern, space.n_elements(), || k.scratch(), |s, e, out| element_ns(&k, s, e, out)).unwrap();
        let cv = system.matvec(&v);
        let vcv: f64 = v.iter().zip(&cv).map(|(a, b)| a * b).sum();
        let scale: f64 = cv.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!(vcv.abs() <= 1e-12 * scale, "{vcv:e}");
    }

    #[test]
    fn velocity_bases_partition_unity(x in 0.0..1.0f64, y in 0.0..1.0f64, n in 1usize..5, k in 2usize..4, spline in any::<bool>()) {
        let family = if spline { ElementFamily::SplineTaylorHood } else { ElementFamily::LagrangeTaylorHood };
        let space = build_space(family, k, n, [0.0; 2], [1.0; 2]).unwrap();
        let ones = vec![1.0; space.velocity.n_dofs];
        let s = space.velocity.evaluate(&ones, [x, y]).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }
}
