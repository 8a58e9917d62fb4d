//! Property suites for the solver core and the module invariants.

mod common;

use std::sync::Arc;

use gne_core::control::{prediction, riccati, simulate_mpc, build_mpc_game, LinearSystem, Mat, MpcConfig, MpcMode};
use gne_core::convexcore::{solve_lp, solve_qp, ConvexStatus, LPProblem, QPProblem};
use gne_core::diff::{jacobian, Dual, Scalar, VectorFn};
use gne_core::instances::{mpc_scenario, random_convex_lq, random_system};
use gne_core::kkt::{fb_smooth, fischer_burmeister, recombine, residual, split, KKTLayout, KKTVector};
use gne_core::milp::{build_mip, enumerate_on, kkt_vector, MipConfig, DEFAULT_BIG_M};
use gne_core::model::{build_inverse_objective, InverseNorm, PlayerLayout};
use gne_core::nls::{lq_certificate, solve_gne_nls, LMConfig, LMStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- FB

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fb_zero_means_complementary((a, b) in common::fb_pair()) {
        let phi = fischer_burmeister(a, b);
        if phi.abs() <= 1e-8 {
            prop_assert!(a.min(b) >= -1e-4, "{a} {b}");
            prop_assert!((a * b).abs() <= 1e-4, "{a} {b}");
        }
        if a >= 0.0 && b >= 0.0 && a * b == 0.0 {
            prop_assert_eq!(phi, 0.0);
        }
        prop_assert!((fb_smooth(a, b) - phi).abs() <= 1e-10);
    }
}

// ---------------------------------------------------------------- LP

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for inst in 0..200 {
        let lp = common::random_lp(&mut rng);
        let res = solve_lp(&lp);
        assert_eq!(res.status, ConvexStatus::Optimal, "instance {inst}");
        let oracle = common::vertex_minimum(&lp);
        let scale = 1.0 + oracle.abs();
        assert!((res.objective - oracle).abs() <= 1e-8 * scale, "instance {inst}: {} vs {oracle}", res.objective);
        // strong duality
        assert!((res.objective - res.lp_dual_objective(&lp)).abs() <= 1e-8 * scale, "instance {inst}");
        assert!(res.kkt_error(&lp, None) <= 1e-8, "instance {inst}");
    }
}

// ---------------------------------------------------------------- QP

#[test]
fn qp_solutions_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for inst in 0..200 {
        let lp = common::random_lp(&mut rng);
        let n = lp.n();
        let rank = rng.random_range(0..=n);
        let l = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        let h = &l * l.transpose();
        let res = solve_qp(&QPProblem::new(h.clone(), lp.clone()));
        assert_eq!(res.status, ConvexStatus::Optimal, "instance {inst}");
        let e = common::qp_kkt_residual(&h, &lp, &res.x, &res.lambda, &res.mu);
        assert!(e <= 1e-8, "instance {inst}: {e}");
    }
}

// ---------------------------------------------------------------- model, kkt, diff

proptest! {
    #[test]
    fn inf_norm_objective_is_exact(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..8)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let xd: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d = build_inverse_objective(&xd, InverseNorm::Inf, 0);
        let want = x.iter().zip(&xd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert_eq!(d.pwa_value(&x, &[]), want);
    }

    #[test]
    fn split_round_trip(x in prop::collection::vec(-1e6..1e6f64, 0..10)) {
        let (xp, xm) = split(&x);
        prop_assert!(xp.iter().chain(&xm).all(|&v| v >= 0.0));
        prop_assert_eq!(recombine(&xp, &xm), x);
    }

    #[test]
    fn polynomial_derivative(coef in prop::collection::vec(-5.0..5.0f64, 1..7), t in -2.0..2.0f64) {
        let x = Dual::variable(t);
        let mut p = Dual::constant(0.0);
        for &a in coef.iter().rev() {
            p = p * x + a;
        }
        let want: f64 = coef.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a * t.powi(k as i32 - 1)).sum();
        prop_assert!((p.deriv - want).abs() <= 1e-10 * (1.0 + want.abs()));
        // chain rule through a composition
        let s = Scalar::exp(Scalar::sin(x) * 0.5);
        let want = (0.5 * t.sin()).exp() * 0.5 * t.cos();
        prop_assert!((s.deriv - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn jacobian_of_linear_map(seed in 0u64..1000, m in 1usize..5, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let am = a.clone();
        let f: Arc<VectorFn> = Arc::new(move |x, _p| {
            (0..am.nrows()).map(|i| (0..am.ncols()).map(|k| x[k] * am[(i, k)]).sum()).collect()
        });
        let j = jacobian(&*f, &x, &[]).unwrap();
        prop_assert!((j.entries() - &a).amax() <= 1e-14);
    }
}

// ---------------------------------------------------------------- nls

#[test]
fn lm_merit_is_monotone_and_converged_means_certified() {
    let mut converged = 0;
    for seed in 0..20u64 {
        let players = 1 + (seed % 3) as usize;
        let dims: Vec<usize> = (0..players).map(|i| 1 + ((seed as usize + i) % 3)).collect();
        let lq = random_convex_lq(seed, &dims, 2, seed % 2 == 0);
        let g = lq.to_nonlinear();
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &vec![0.0; lq.n()]);
        let r = solve_gne_nls(&g, &[], &z0, &LMConfig::default()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].merit <= w[0].merit, "seed {seed}: merit rose {} → {}", w[0].merit, w[1].merit);
        }
        if r.status == LMStatus::Converged {
            converged += 1;
            let cert = lq_certificate(&lq, r.x(), &[], 1e-4);
            assert!(cert.pass, "seed {seed}: {cert:?}");
        }
    }
    assert!(converged >= 15, "only {converged} of 20 converged");
}

// ---------------------------------------------------------------- milp

#[test]
fn mip_results_are_exact_kkt_points() {
    let mut seen = 0;
    for seed in 0..12u64 {
        let players = 2 + (seed % 2) as usize;
        let dims = vec![2; players];
        let game = random_convex_lq(100 + seed, &dims, 3, seed % 2 == 0);
        for variational in [false, true] {
            let mut gm = build_mip(&game, None, variational, DEFAULT_BIG_M).unwrap();
            let (rs, _) = enumerate_on(&mut gm, 20, &MipConfig::default());
            seen += rs.len();
            for r in &rs {
                assert!(r.kkt_residual <= 1e-7, "seed {seed}: residual {}", r.kkt_residual);
                assert!(r.big_m_slack_margin > 0.0);
                let slack = gm.kkt.aug.slack(&r.x, &r.p);
                for j in 0..gm.m() {
                    let lam_max = r.lambda.iter().map(|b| b[j]).fold(0.0, f64::max);
                    assert!(lam_max <= 1e-6 || slack[j] <= 1e-6, "seed {seed} row {j}");
                    if r.signature.delta[j] {
                        assert!(slack[j] <= 1e-6);
                    } else {
                        assert!(lam_max <= 1e-6);
                    }
                }
                if variational {
                    // shared multipliers copied to every player solve the per-player system
                    let z = kkt_vector(&gm, &r.x, &r.lambda, &r.mu).expand_variational();
                    let res = residual(&game.to_nonlinear(), &z, &[]).unwrap();
                    assert!(res.iter().all(|v| v.abs() <= 1e-7), "seed {seed}");
                }
            }
        }
    }
    eprintln!("{seen} equilibria checked");
    assert!(seen >= 24);
}

// ---------------------------------------------------------------- control

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn prediction_equals_simulation(seed in 0u64..10_000, nx in 1usize..5, nu in 1usize..4, horizon in 1usize..8) {
        let (a, b) = random_system(seed, nx, nu, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let c = DMatrix::from_fn(2, nx, |_, _| rng.random_range(-1.0..1.0));
        let sys = LinearSystem::new(a, b, c, PlayerLayout::new(vec![nu]).unwrap()).unwrap();
        let p = prediction(&sys, horizon);
        let x0: Vec<f64> = (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u_prev: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
        let du: Vec<f64> = (0..horizon * nu).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = &p.phi * DVector::from_column_slice(&x0)
            + &p.gamma * DVector::from_column_slice(&u_prev)
            + &p.g * DVector::from_column_slice(&du);
        let (mut x, mut u) = (x0, u_prev);
        for k in 0..horizon {
            for (j, uj) in u.iter_mut().enumerate() {
                *uj += du[k * nu + j];
            }
            x = sys.step(&x, &u);
            for (o, yo) in sys.output(&x).iter().enumerate() {
                prop_assert!((yo - y[k * 2 + o]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn scalar_riccati_is_monotone(a in -1.2..1.2f64, b in 0.5..2.0f64, q in 0.5..2.0f64, r in 0.5..2.0f64) {
        let m = |v: f64| Mat::from_dmatrix(&DMatrix::from_element(1, 1, v));
        let res = riccati(&m(a), &m(b), &m(q), &m(r), 50).unwrap();
        let ps: Vec<f64> = res.p.iter().map(|p| p.at(0, 0)).collect();
        for w in ps.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
        let (last, prev) = (ps[ps.len() - 1], ps[ps.len() - 2]);
        prop_assert!((last - prev).abs() <= 1e-8 * last.abs());
    }
}

#[test]
fn mpc_slacks_vanish_when_hard_constraints_are_feasible() {
    let spec = mpc_scenario(3);
    let cfg = MpcConfig::default();
    let tr = simulate_mpc(&spec, &[0.0; 6], None, 40, MpcMode::Nash, &cfg).unwrap();
    assert!(tr.halted.is_none());
    let mut u_prev = vec![0.0; 3];
    for s in &tr.steps {
        assert!(s.eps.iter().all(|&e| e >= 0.0), "t = {}: {:?}", s.t, s.eps);
        let r = spec.setpoint_at(s.t).as_slice().to_vec();
        let g = build_mpc_game(&spec, &s.x, &u_prev, &r).unwrap();
        // the unsoftened problem: every slack fixed at zero
        let (lo, mut hi) = g.bounds();
        for i in 0..g.players() {
            hi[g.layout.range(i).end - 1] = 0.0;
        }
        let hard = solve_lp(&LPProblem::new(DVector::zeros(g.n())).with_ineq(g.a.clone(), g.b.clone()).with_bounds(lo, hi));
        if hard.status == ConvexStatus::Optimal {
            assert!(s.eps.iter().all(|&e| e <= 1e-6), "t = {}: {:?}", s.t, s.eps);
        }
        u_prev = s.u.clone();
    }
}
