//! Solving the big-M model, enumerating equilibria and inverse design.

use nalgebra::{DMatrix, DVector};

use super::bnb::{branch_and_bound, BnbConfig, BnbStatus};
use super::build::{build_mip, ActiveSetSignature, GameMip};
use crate::error::{Error, Result};
use crate::kkt::{residual, KKTLayout, KKTVector};
use crate::linalg::inf_norm;
use crate::model::{build_inverse_objective, InverseNorm, LQGame, RowOrigin};
use crate::convexcore::{solve_lp, solve_qp, ConvexStatus, LPProblem, QPProblem};
use crate::nls::{lq_best_response, lq_certificate, Certificate};

pub const DEFAULT_BIG_M: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct MipConfig {
    pub node_limit: usize,
    pub int_tol: f64,
    /// Tolerance of the best-response certificate attached to results.
    pub cert_tol: f64,
    pub heuristic: bool,
    /// Signatures tried as leaves before branching.
    pub hints: Vec<ActiveSetSignature>,
}

impl Default for MipConfig {
    fn default() -> Self {
        MipConfig {
            node_limit: 100_000,
            int_tol: 1e-6,
            cert_tol: 1e-6,
            heuristic: true,
            hints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

impl MipStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            MipStatus::Optimal => "optimal",
            MipStatus::Infeasible => "infeasible",
            MipStatus::NodeLimit => "node_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MipWarning {
    /// The smallest big-M margin fell to `0.01·M` or below.
    BigMTight { margin: f64 },
    /// The recovered KKT point has residual above `1e-7`.
    KktResidual { value: f64 },
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Multipliers per block over all rows of `Ā` (zero where unused).
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub signature: ActiveSetSignature,
    pub objective: f64,
    pub nodes: usize,
    pub big_m_slack_margin: f64,
    /// `‖R(z, p)‖∞` of the KKT residual at the recovered point.
    pub kkt_residual: f64,
    pub certificate: Option<Certificate>,
    pub warnings: Vec<MipWarning>,
}

impl MipResult {
    fn empty(status: MipStatus, nodes: usize) -> Self {
        MipResult {
            status,
            x: Vec::new(),
            p: Vec::new(),
            lambda: Vec::new(),
            mu: Vec::new(),
            sigma: Vec::new(),
            signature: ActiveSetSignature { delta: Vec::new() },
            objective: f64::INFINITY,
            nodes,
            big_m_slack_margin: f64::NAN,
            kkt_residual: f64::NAN,
            certificate: None,
            warnings: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == MipStatus::Optimal
    }

    pub fn certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.pass)
    }
}

/// Map a MIP solution onto the KKT vector of the callback form of the game.
pub fn kkt_vector(gm: &GameMip, x: &[f64], lambda: &[Vec<f64>], mu: &[Vec<f64>]) -> KKTVector {
    let game = &gm.game;
    let (lo, hi) = game.bounds();
    let layout = KKTLayout::new(game.layout.clone(), game.n_g(), game.n_h(), &lo, &hi, gm.variational);
    let mut data = vec![0.0; layout.total()];
    data[..x.len()].copy_from_slice(x);
    let mut z = KKTVector {
        data,
        layout: layout.clone(),
    };
    let mut v_of = vec![None; game.n()];
    for (c, &k) in layout.v_index.iter().enumerate() {
        v_of[k] = Some(layout.v_range().start + c);
    }
    let mut y_of = vec![None; game.n()];
    for (c, &k) in layout.y_index.iter().enumerate() {
        y_of[k] = Some(layout.y_range().start + c);
    }
    for (b, blk) in lambda.iter().enumerate() {
        for (j, &l) in blk.iter().enumerate() {
            match gm.kkt.aug.row_origin[j] {
                RowOrigin::Shared(s) => z.data[layout.lambda_block(b).start + s] = l,
                o @ RowOrigin::Upper { .. } => {
                    let k = o.variable(&game.layout).expect("bound row");
                    if l != 0.0 {
                        z.data[y_of[k].expect("finite upper bound")] = l;
                    }
                }
                o @ RowOrigin::Lower { .. } => {
                    let k = o.variable(&game.layout).expect("bound row");
                    if l != 0.0 {
                        z.data[v_of[k].expect("finite lower bound")] = l;
                    }
                }
            }
        }
    }
    for (b, blk) in mu.iter().enumerate() {
        let start = layout.mu_block(b).start;
        z.data[start..start + blk.len()].copy_from_slice(blk);
    }
    z
}

const BR_SWEEPS: usize = 200;

/// Active rows of the point reached by Gauss-Seidel best-response sweeps
/// from a feasible start. Only for games without parameters; `None` when a
/// best response fails or no feasible start exists.
pub fn best_response_signature(gm: &GameMip) -> Option<ActiveSetSignature> {
    let game = &gm.game;
    if game.n_p() > 0 {
        return None;
    }
    let n = game.n();
    let (lo, hi) = game.bounds();
    let lp = LPProblem::new(DVector::zeros(n))
        .with_ineq(game.a.clone(), game.b.clone())
        .with_eq(game.a_eq.clone(), game.b_eq.clone())
        .with_bounds(lo, hi);
    // start from the social optimum when it exists, else any feasible point
    let h = game.q.iter().fold(DMatrix::zeros(n, n), |acc, q| acc + (q + q.transpose()) * 0.5);
    let c = game.c.iter().fold(DVector::zeros(n), |acc, c| acc + c);
    let mut start = solve_qp(&QPProblem::new(h, LPProblem { c, ..lp.clone() }));
    if start.status != ConvexStatus::Optimal {
        start = solve_lp(&lp);
    }
    if start.status != ConvexStatus::Optimal {
        return None;
    }
    let mut x = start.x.as_slice().to_vec();
    for _ in 0..BR_SWEEPS {
        let mut moved = 0.0_f64;
        for i in 0..game.players() {
            let (st, br) = lq_best_response(game, i, &x, &[]);
            if st != ConvexStatus::Optimal {
                return None;
            }
            for (k, v) in game.layout.range(i).zip(br) {
                moved = moved.max((x[k] - v).abs());
                x[k] = v;
            }
        }
        if moved <= 1e-11 * (1.0 + inf_norm(&x)) {
            break;
        }
    }
    let slack = gm.kkt.aug.slack(&x, &[]);
    let delta = (0..gm.m())
        .map(|j| slack[j].abs() <= 1e-7 * (1.0 + gm.kkt.aug.b_bar[j].abs()))
        .collect();
    Some(ActiveSetSignature { delta })
}

/// Branch and bound on the model held by `gm`, with recovery and checks.
/// With the heuristic on, the signature of [`best_response_signature`] is
/// tried after any user hints.
pub fn solve_mip(gm: &GameMip, cfg: &MipConfig) -> MipResult {
    let mut hints: Vec<Vec<bool>> = cfg.hints.iter().map(|h| h.delta.clone()).collect();
    if cfg.heuristic {
        hints.extend(best_response_signature(gm).map(|s| s.delta));
    }
    let out = branch_and_bound(
        &gm.model,
        &BnbConfig {
            node_limit: cfg.node_limit,
            int_tol: cfg.int_tol,
            heuristic: cfg.heuristic,
            hints,
            ..Default::default()
        },
    );
    if out.values.is_empty() {
        let status = match out.status {
            BnbStatus::NodeLimit => MipStatus::NodeLimit,
            _ => MipStatus::Infeasible,
        };
        return MipResult::empty(status, out.nodes);
    }
    let v = &out.values;
    let map = &gm.map;
    let x: Vec<f64> = v[map.x.clone()].to_vec();
    let p: Vec<f64> = v[map.p.clone()].to_vec();
    let pick = |slot: &Option<usize>| slot.map(|k| v[k]).unwrap_or(0.0);
    let lambda: Vec<Vec<f64>> = map.lambda.iter().map(|b| b.iter().map(pick).collect()).collect();
    let mu: Vec<Vec<f64>> = map.mu.iter().map(|b| b.iter().map(pick).collect()).collect();
    let sigma: Vec<f64> = map.sigma.iter().map(|&k| v[k]).collect();
    let delta: Vec<f64> = map.delta.iter().map(|&k| v[k]).collect();
    let signature = ActiveSetSignature::from_values(&delta);

    let slack = gm.kkt.aug.slack(&x, &p);
    let mut margin = f64::INFINITY;
    for j in 0..gm.m() {
        let used = if signature.delta[j] {
            lambda.iter().map(|b| b[j]).fold(0.0, f64::max)
        } else {
            slack[j]
        };
        margin = margin.min(gm.big_m - used.abs());
    }
    let mut warnings = Vec::new();
    if margin <= 0.01 * gm.big_m {
        log::warn!("big-M margin {margin:.3e} is within 1% of M = {:.3e}", gm.big_m);
        warnings.push(MipWarning::BigMTight { margin });
    }
    let z = kkt_vector(gm, &x, &lambda, &mu);
    let kkt_residual = residual(&gm.game.to_nonlinear(), &z, &p)
        .map(|r| inf_norm(&r))
        .unwrap_or(f64::INFINITY);
    if kkt_residual > 1e-7 {
        log::warn!("KKT residual {kkt_residual:.3e} at the recovered point");
        warnings.push(MipWarning::KktResidual { value: kkt_residual });
    }
    let certificate = Some(lq_certificate(&gm.game, &x, &p, cfg.cert_tol));
    MipResult {
        status: match out.status {
            BnbStatus::NodeLimit => MipStatus::NodeLimit,
            _ => MipStatus::Optimal,
        },
        x,
        p,
        lambda,
        mu,
        sigma,
        signature,
        objective: out.objective,
        nodes: out.nodes,
        big_m_slack_margin: margin,
        kkt_residual,
        certificate,
        warnings,
    }
}

/// Solve repeatedly, excluding each signature found with a no-good cut.
/// Stops at the first non-optimal solve or after `max_count` results; the
/// terminating non-optimal result is not included.
pub fn enumerate_on(gm: &mut GameMip, max_count: usize, cfg: &MipConfig) -> (Vec<MipResult>, MipStatus) {
    let mut found = Vec::new();
    while found.len() < max_count {
        let r = solve_mip(gm, cfg);
        if !r.is_optimal() {
            return (found, r.status);
        }
        let done = found.len() + 1 == max_count;
        if !done {
            gm.add_cut(&r.signature);
        }
        found.push(r);
    }
    (found, MipStatus::Optimal)
}

/// Enumerate equilibria with distinct active-set signatures.
pub fn enumerate_equilibria(
    game: &LQGame,
    design: Option<&crate::model::DesignObjective>,
    variational: bool,
    big_m: f64,
    max_count: usize,
    cfg: &MipConfig,
) -> Result<Vec<MipResult>> {
    if max_count == 0 {
        return Err(Error::InvalidGame("max_count must be at least 1".into()));
    }
    let mut gm = build_mip(game, design, variational, big_m)?;
    Ok(enumerate_on(&mut gm, max_count, cfg).0)
}

/// Result of an inverse-game solve.
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub mip: MipResult,
    pub norm: InverseNorm,
    /// `‖x*(p*) − x_des‖` in the chosen norm.
    pub distance: f64,
}

pub fn distance(x: &[f64], x_des: &[f64], norm: InverseNorm) -> f64 {
    let d = DVector::from_iterator(x.len(), x.iter().zip(x_des).map(|(a, b)| a - b));
    match norm {
        InverseNorm::Inf => d.amax(),
        InverseNorm::One => d.lp_norm(1),
        InverseNorm::Two => d.norm(),
    }
}

/// Find `p ∈ P` whose equilibrium is closest to `x_des`.
pub fn solve_inverse_lq(
    game: &LQGame,
    x_des: &[f64],
    norm: InverseNorm,
    big_m: f64,
    cfg: &MipConfig,
) -> Result<InverseResult> {
    if game.n_p() == 0 {
        return Err(Error::InvalidGame("inverse problem needs at least one parameter".into()));
    }
    if x_des.len() != game.n() {
        return Err(Error::Dimension(format!("x_des has length {}, game has {}", x_des.len(), game.n())));
    }
    let design = build_inverse_objective(x_des, norm, game.n_p());
    let gm = build_mip(game, Some(&design), false, big_m)?;
    let mip = solve_mip(&gm, cfg);
    let distance = if mip.is_optimal() {
        distance(&mip.x, x_des, norm)
    } else {
        f64::INFINITY
    };
    Ok(InverseResult { mip, norm, distance })
}
