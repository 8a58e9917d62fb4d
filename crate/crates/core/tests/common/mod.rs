//! Independent oracles shared by the test targets: brute-force active-set
//! enumeration, LP vertex enumeration, a QP KKT check and FB test pairs.

#![allow(dead_code)]

use std::collections::BTreeSet;

use gne_core::convexcore::{solve_lp, ConvexStatus, LPProblem};
use gne_core::model::{augment_bounds, LQGame};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Feasible signatures (as 1-based active row lists) of a parameter-free
/// LQ game, found by solving one LP per subset of rows of `Ā`.
pub fn brute_force_signatures(game: &LQGame) -> BTreeSet<Vec<usize>> {
    let aug = augment_bounds(game);
    let n = game.n();
    let m = aug.rows();
    let players = game.players();
    let n_h = game.n_h();
    // variables: x, λ (players × m), μ (players × n_h)
    let nv = n + players * m + players * n_h;
    let lam = |i: usize, j: usize| n + i * m + j;
    let mu = |i: usize, j: usize| n + players * m + i * n_h + j;
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << m) {
        let active = |j: usize| (mask >> j) & 1 == 1;
        let mut eq_rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..players {
            let q = (&game.q[i] + game.q[i].transpose()) * 0.5;
            for k in game.layout.range(i) {
                let mut row = DVector::zeros(nv);
                for c in 0..n {
                    row[c] = q[(k, c)];
                }
                for j in 0..m {
                    row[lam(i, j)] = aug.a_bar[(j, k)];
                }
                for j in 0..n_h {
                    row[mu(i, j)] = game.a_eq[(j, k)];
                }
                eq_rows.push((row, -game.c[i][k]));
            }
        }
        for j in 0..n_h {
            let mut row = DVector::zeros(nv);
            for c in 0..n {
                row[c] = game.a_eq[(j, c)];
            }
            eq_rows.push((row, game.b_eq[j]));
        }
        let mut ub_rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for j in 0..m {
            let mut row = DVector::zeros(nv);
            for c in 0..n {
                row[c] = aug.a_bar[(j, c)];
            }
            if active(j) {
                eq_rows.push((row, aug.b_bar[j]));
            } else {
                ub_rows.push((row, aug.b_bar[j]));
            }
        }
        let mut lower = vec![f64::NEG_INFINITY; nv];
        let mut upper = vec![f64::INFINITY; nv];
        for i in 0..players {
            for j in 0..m {
                lower[lam(i, j)] = 0.0;
                if !active(j) {
                    upper[lam(i, j)] = 0.0;
                }
            }
        }
        let stack = |rows: &[(DVector<f64>, f64)]| {
            let a = DMatrix::from_fn(rows.len(), nv, |r, c| rows[r].0[c]);
            let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
            (a, b)
        };
        let (a_eq, b_eq) = stack(&eq_rows);
        let (a_ub, b_ub) = stack(&ub_rows);
        let lp = LPProblem::new(DVector::zeros(nv))
            .with_eq(a_eq, b_eq)
            .with_ineq(a_ub, b_ub)
            .with_bounds(lower, upper);
        if solve_lp(&lp).status == ConvexStatus::Optimal {
            out.insert((0..m).filter(|&j| active(j)).map(|j| j + 1).collect());
        }
    }
    out
}

pub fn fb_pair() -> impl Strategy<Value = (f64, f64)> {
    prop_oneof![
        (-10.0..10.0f64, -10.0..10.0f64),
        (0.0..10.0f64).prop_map(|a| (a, 0.0)),
        (0.0..10.0f64).prop_map(|b| (0.0, b)),
        (-1e-3..1e-3f64, -1e-3..1e-3f64),
        (0.0..10.0f64, -1e-6..1e-6f64),
    ]
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> LPProblem {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=5);
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
    let b = DVector::from_fn(m, |i, _| {
        let ax: f64 = (0..n).map(|k| a[(i, k)] * x0[k]).sum();
        ax + rng.random_range(0.0..1.0)
    });
    let c = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..-1.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
    let mut lp = LPProblem::new(c).with_ineq(a, b).with_bounds(lower, upper);
    if n > 1 && rng.random_bool(0.3) {
        let e = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let ex: f64 = (0..n).map(|k| e[(0, k)] * x0[k]).sum();
        lp = lp.with_eq(e, DVector::from_element(1, ex));
    }
    lp
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Minimum of `cᵀx` over all vertices: every choice of `n` linearly
/// independent tight constraints (equalities always tight).
pub fn vertex_minimum(lp: &LPProblem) -> f64 {
    let n = lp.n();
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..lp.a_ub.nrows() {
        cons.push(((0..n).map(|k| lp.a_ub[(i, k)]).collect(), lp.b_ub[i]));
    }
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = -1.0;
        cons.push((e.clone(), -lp.lower[k]));
        e[k] = 1.0;
        cons.push((e, lp.upper[k]));
    }
    let eqs: Vec<(Vec<f64>, f64)> =
        (0..lp.a_eq.nrows()).map(|i| ((0..n).map(|k| lp.a_eq[(i, k)]).collect(), lp.b_eq[i])).collect();
    let mut best = f64::INFINITY;
    for s in subsets(cons.len(), n - eqs.len()) {
        let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(s.iter().map(|&j| &cons[j])).collect();
        let m = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
        let rhs = DVector::from_fn(n, |r, _| rows[r].1);
        if m.clone().svd(false, false).singular_values.min() < 1e-9 {
            continue;
        }
        let Some(x) = m.lu().solve(&rhs) else { continue };
        if lp.infeasibility(&x) <= 1e-9 {
            best = best.min(lp.c.dot(&x));
        }
    }
    best
}

/// KKT residual of a QP solution, with bound multipliers recovered from the
/// stationarity gap rather than taken from the solver.
pub fn qp_kkt_residual(h: &DMatrix<f64>, lp: &LPProblem, x: &DVector<f64>, lam: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let n = lp.n();
    let mut err = lp.infeasibility(x);
    let mut r = h * x + &lp.c;
    if lp.a_ub.nrows() > 0 {
        r += lp.a_ub.transpose() * lam;
        let s = &lp.a_ub * x - &lp.b_ub;
        for i in 0..s.len() {
            err = err.max(-lam[i]).max((lam[i] * s[i]).abs());
        }
    }
    if lp.a_eq.nrows() > 0 {
        r += lp.a_eq.transpose() * mu;
    }
    for k in 0..n {
        let at_lo = (x[k] - lp.lower[k]).abs() <= 1e-9;
        let at_hi = (lp.upper[k] - x[k]).abs() <= 1e-9;
        // r_k = ν_lo − ν_hi with ν ≥ 0 only on tight bounds
        let gap = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => (-r[k]).max(0.0),
            (false, true) => r[k].max(0.0),
            (false, false) => r[k].abs(),
        };
        err = err.max(gap / (1.0 + lp.c.amax()));
    }
    err
}
