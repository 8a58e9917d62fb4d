//! Per-player best-response checks.
//!
//! Nonlinear games: projected gradient with Armijo backtracking on a
//! quadratic penalty of the shared constraints, continued over increasing
//! weights. LQ games: each player's problem is an exact QP.

use nalgebra::{DMatrix, DVector};

use crate::convexcore::{solve_qp, ConvexStatus, LPProblem, QPProblem};
use crate::diff::{grad, jacobian};
use crate::model::{LQGame, NonlinearGame};

/// Tolerance used when solvers certify their own equilibria.
pub const CERT_TOL: f64 = 1e-4;

const PG_ITERS: usize = 500;
const PENALTIES: [f64; 3] = [1e2, 1e4, 1e6];

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCertificate {
    pub player: usize,
    /// `f_i(x*) − f_i(best response)`; positive means the player can improve.
    pub improvement: f64,
    /// Constraint violation of the best response found.
    pub feasibility: f64,
    pub best_response: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub players: Vec<PlayerCertificate>,
    /// Constraint violation of the candidate itself.
    pub infeasibility: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Certificate {
    fn assemble(players: Vec<PlayerCertificate>, infeasibility: f64, tol: f64) -> Self {
        let pass = infeasibility <= tol && players.iter().all(|c| c.pass);
        Certificate {
            players,
            infeasibility,
            tol,
            pass,
        }
    }

    pub fn max_improvement(&self) -> f64 {
        self.players.iter().map(|c| c.improvement).fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Penalized<'a> {
    game: &'a NonlinearGame,
    x: Vec<f64>,
    p: &'a [f64],
    player: usize,
    kappa: f64,
}

impl Penalized<'_> {
    fn full(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.x.clone();
        x[self.game.layout.range(self.player)].copy_from_slice(y);
        x
    }

    fn value(&self, y: &[f64]) -> f64 {
        let x = self.full(y);
        let pen: f64 = self.game.g_values(&x, self.p).iter().map(|g| g.max(0.0).powi(2)).sum::<f64>()
            + self.game.h_values(&x, self.p).iter().map(|h| h * h).sum::<f64>();
        self.game.cost(self.player, &x, self.p) + 0.5 * self.kappa * pen
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        let x = self.full(y);
        let r = self.game.layout.range(self.player);
        let gf = grad(&*self.game.costs[self.player], &x, self.p).ok()?;
        let mut out: Vec<f64> = gf[r.clone()].to_vec();
        if let Some(g) = &self.game.ineq {
            let vals = self.game.g_values(&x, self.p);
            let jg = jacobian(&**g, &x, self.p).ok()?.into_inner();
            for (j, v) in vals.iter().enumerate() {
                if *v > 0.0 {
                    for (c, k) in r.clone().enumerate() {
                        out[c] += self.kappa * v * jg[(j, k)];
                    }
                }
            }
        }
        if let Some(h) = &self.game.eq {
            let vals = self.game.h_values(&x, self.p);
            let jh = jacobian(&**h, &x, self.p).ok()?.into_inner();
            for (j, v) in vals.iter().enumerate() {
                for (c, k) in r.clone().enumerate() {
                    out[c] += self.kappa * v * jh[(j, k)];
                }
            }
        }
        Some(out)
    }
}

fn project(y: &mut [f64], lo: &[f64], hi: &[f64]) {
    for k in 0..y.len() {
        y[k] = y[k].max(lo[k]).min(hi[k]);
    }
}

/// Best-response check for a nonlinear game at `(x, p)`.
pub fn best_response_certificate(game: &NonlinearGame, x: &[f64], p: &[f64], tol: f64) -> Certificate {
    let (lo, hi) = game.bounds();
    let infeasibility = game.infeasibility(x, p);
    let feas_tol = (0.01 * tol).max(1e-9);
    let mut players = Vec::with_capacity(game.layout.players());
    for i in 0..game.layout.players() {
        let r = game.layout.range(i);
        let (blo, bhi) = (&lo[r.clone()], &hi[r.clone()]);
        let f_star = game.cost(i, x, p);
        let mut best_y = x[r.clone()].to_vec();
        let mut best_f = f_star;
        let mut best_feas = infeasibility;
        let mut y = best_y.clone();
        project(&mut y, blo, bhi);
        let mut pen = Penalized {
            game,
            x: x.to_vec(),
            p,
            player: i,
            kappa: 0.0,
        };
        for &kappa in &PENALTIES {
            pen.kappa = kappa;
            let mut t = 1.0;
            let mut val = pen.value(&y);
            for _ in 0..PG_ITERS {
                let Some(g) = pen.gradient(&y) else { break };
                let mut accepted = false;
                let mut trial = y.clone();
                for _ in 0..60 {
                    trial = y.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                    project(&mut trial, blo, bhi);
                    let dec: f64 = g.iter().zip(trial.iter().zip(&y)).map(|(gk, (a, b))| gk * (a - b)).sum();
                    let tv = pen.value(&trial);
                    if tv.is_finite() && tv <= val + 1e-4 * dec {
                        val = tv;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
                let moved: f64 = trial.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                y = trial;
                let xf = pen.full(&y);
                let feas = game.infeasibility(&xf, p);
                let f = game.cost(i, &xf, p);
                if feas <= feas_tol.max(infeasibility) && f < best_f {
                    best_f = f;
                    best_y = y.clone();
                    best_feas = feas;
                }
                if moved <= 1e-14 * (1.0 + y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
                    break;
                }
                t = (t * 2.0).min(1e6);
            }
        }
        let improvement = f_star - best_f;
        players.push(PlayerCertificate {
            player: i,
            improvement,
            feasibility: best_feas,
            best_response: best_y,
            pass: improvement <= tol,
        });
    }
    Certificate::assemble(players, infeasibility, tol)
}

/// Player `i`'s exact best response to `x` in an LQ game, as a QP over its
/// own block. Rows without the player's variables are left out.
pub fn lq_best_response(game: &LQGame, i: usize, x: &[f64], p: &[f64]) -> (ConvexStatus, Vec<f64>) {
    let pv = DVector::from_column_slice(p);
    let (lo, hi) = game.bounds();
    let r = game.layout.range(i);
    let ni = r.len();
    let others = |a: &DMatrix<f64>, j: usize| -> f64 {
        (0..x.len()).filter(|k| !r.contains(k)).map(|k| a[(j, k)] * x[k]).sum()
    };
    let q = &game.q[i];
    let h = q.view((r.start, r.start), (ni, ni)).into_owned();
    let h = (&h + h.transpose()) * 0.5;
    let full_lin = &game.c[i] + &game.f[i] * &pv;
    // gradient part from other players' variables (symmetrized)
    let qs = (q + q.transpose()) * 0.5;
    let mut lin = DVector::zeros(ni);
    for (c, k) in r.clone().enumerate() {
        let mut s = full_lin[k];
        for l in 0..x.len() {
            if !r.contains(&l) {
                s += qs[(k, l)] * x[l];
            }
        }
        lin[c] = s;
    }
    let rows_of = |a: &DMatrix<f64>| -> Vec<usize> {
        (0..a.nrows()).filter(|&j| r.clone().any(|k| a[(j, k)] != 0.0)).collect()
    };
    let ub_rows = rows_of(&game.a);
    let eq_rows = rows_of(&game.a_eq);
    let sp = if game.n_g() > 0 { &game.b + &game.s * &pv } else { DVector::zeros(0) };
    let sp_eq = if game.n_h() > 0 { &game.b_eq + &game.s_eq * &pv } else { DVector::zeros(0) };
    let a_ub = DMatrix::from_fn(ub_rows.len(), ni, |j, c| game.a[(ub_rows[j], r.start + c)]);
    let b_ub = DVector::from_fn(ub_rows.len(), |j, _| sp[ub_rows[j]] - others(&game.a, ub_rows[j]));
    let a_eq = DMatrix::from_fn(eq_rows.len(), ni, |j, c| game.a_eq[(eq_rows[j], r.start + c)]);
    let b_eq = DVector::from_fn(eq_rows.len(), |j, _| sp_eq[eq_rows[j]] - others(&game.a_eq, eq_rows[j]));
    let lp = LPProblem::new(lin)
        .with_ineq(a_ub, b_ub)
        .with_eq(a_eq, b_eq)
        .with_bounds(lo[r.clone()].to_vec(), hi[r.clone()].to_vec());
    let res = solve_qp(&QPProblem::new(h, lp));
    (res.status, res.x.as_slice().to_vec())
}

/// Best-response check for an LQ game: each player's problem is solved as a
/// QP with the other players fixed.
pub fn lq_certificate(game: &LQGame, x: &[f64], p: &[f64], tol: f64) -> Certificate {
    let infeasibility = game.infeasibility(x, p);
    let mut players = Vec::with_capacity(game.players());
    for i in 0..game.players() {
        let r = game.layout.range(i);
        let ni = r.len();
        let (status, br) = lq_best_response(game, i, x, p);
        let f_star = game.cost(i, x, p);
        let cert = match status {
            ConvexStatus::Optimal => {
                let mut xb = x.to_vec();
                xb[r.clone()].copy_from_slice(&br);
                let improvement = f_star - game.cost(i, &xb, p);
                let feasibility = game.infeasibility(&xb, p).max(0.0);
                PlayerCertificate {
                    player: i,
                    improvement,
                    feasibility,
                    best_response: br,
                    pass: improvement <= tol && feasibility <= tol.max(infeasibility),
                }
            }
            ConvexStatus::Unbounded => PlayerCertificate {
                player: i,
                improvement: f64::INFINITY,
                feasibility: 0.0,
                best_response: vec![f64::NAN; ni],
                pass: false,
            },
            _ => PlayerCertificate {
                player: i,
                improvement: f64::NAN,
                feasibility: f64::INFINITY,
                best_response: vec![f64::NAN; ni],
                pass: false,
            },
        };
        players.push(cert);
    }
    Certificate::assemble(players, infeasibility, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{reference_lq_game, REFERENCE_POINTS};
    use crate::model::PlayerLayout;
    use std::sync::Arc;

    #[test]
    fn published_point_passes_lq() {
        let g = reference_lq_game();
        let c = lq_certificate(&g, &REFERENCE_POINTS[1].0, &[], 1e-3);
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn origin_fails_lq_and_nonlinear() {
        let g = reference_lq_game();
        let x = [0.0; 6];
        let c = lq_certificate(&g, &x, &[], 1e-3);
        assert!(!c.pass);
        // player 3 alone: unconstrained response is −2·1 clipped by rows
        assert!(c.players[2].improvement > 1e-3);
        let nl = best_response_certificate(&g.to_nonlinear(), &x, &[], 1e-3);
        assert!(!nl.pass);
        assert!(nl.players[2].improvement > 1e-3);
    }

    #[test]
    fn published_point_passes_nonlinear() {
        let g = reference_lq_game().to_nonlinear();
        let c = best_response_certificate(&g, &REFERENCE_POINTS[1].0, &[], 1e-3);
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn single_player_optimum() {
        let lay = PlayerLayout::uniform(1, 1).unwrap();
        let f: Arc<crate::diff::ScalarFn> = Arc::new(|x, _p| {
            let d = x[0] - crate::diff::Ad::cst(2.0);
            d * d
        });
        let g = NonlinearGame::new(lay, vec![f]);
        assert!(best_response_certificate(&g, &[2.0], &[], 1e-8).pass);
        assert!(!best_response_certificate(&g, &[1.0], &[], 1e-8).pass);
    }
}
