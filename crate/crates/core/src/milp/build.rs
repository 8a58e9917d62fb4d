//! Big-M encoding of the joint KKT conditions of an LQ game.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::model::{MipModel, Sense};
use crate::error::{Error, Result};
use crate::model::{augment_bounds, validate_lq, AugmentedInequalities, DesignObjective, LQGame, PwaPiece};

/// Stationarity data of one player:
/// `Q_i x + c_i + F_i p + Ā_iᵀ λ_i + A_eq,iᵀ μ_i = 0`.
#[derive(Debug, Clone)]
pub struct PlayerKKT {
    pub player: usize,
    pub vars: Range<usize>,
    /// Rows of `∇_{x_i} f_i` in `x`: `n_i × n`.
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub f: DMatrix<f64>,
    /// Rows of `Ā` with a nonzero in the player's columns.
    pub ineq_rows: Vec<usize>,
    /// `Ā` restricted to `ineq_rows` and the player's columns.
    pub a: DMatrix<f64>,
    pub eq_rows: Vec<usize>,
    pub a_eq: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LqKKT {
    pub aug: AugmentedInequalities,
    pub players: Vec<PlayerKKT>,
}

fn involved(a: &DMatrix<f64>, cols: &Range<usize>) -> Vec<usize> {
    (0..a.nrows()).filter(|&j| cols.clone().any(|k| a[(j, k)] != 0.0)).collect()
}

fn restrict(a: &DMatrix<f64>, rows: &[usize], cols: &Range<usize>) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols.start + c)])
}

/// Per-player KKT data with bounds folded into `Ā`.
pub fn assemble_player_kkt(game: &LQGame) -> LqKKT {
    let aug = augment_bounds(game);
    let players = (0..game.players())
        .map(|i| {
            let vars = game.layout.range(i);
            let qs = (&game.q[i] + game.q[i].transpose()) * 0.5;
            let ineq_rows = involved(&aug.a_bar, &vars);
            let eq_rows = involved(&game.a_eq, &vars);
            PlayerKKT {
                player: i,
                q: qs.rows(vars.start, vars.len()).into_owned(),
                c: game.c[i].rows(vars.start, vars.len()).into_owned(),
                f: game.f[i].rows(vars.start, vars.len()).into_owned(),
                a: restrict(&aug.a_bar, &ineq_rows, &vars),
                a_eq: restrict(&game.a_eq, &eq_rows, &vars),
                ineq_rows,
                eq_rows,
                vars,
            }
        })
        .collect();
    LqKKT { aug, players }
}

/// Where each quantity lives in the MIP variable vector.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub x: Range<usize>,
    pub p: Range<usize>,
    /// `lambda[block][row]` for rows of `Ā`; `None` when the block does not use the row.
    pub lambda: Vec<Vec<Option<usize>>>,
    pub mu: Vec<Vec<Option<usize>>>,
    pub delta: Vec<usize>,
    pub sigma: Vec<usize>,
}

/// Binary vector `δ̄` over the rows of `Ā`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActiveSetSignature {
    pub delta: Vec<bool>,
}

impl ActiveSetSignature {
    pub fn from_values(v: &[f64]) -> Self {
        ActiveSetSignature {
            delta: v.iter().map(|d| *d > 0.5).collect(),
        }
    }

    /// 1-based indices of the active rows.
    pub fn active(&self) -> Vec<usize> {
        (0..self.delta.len()).filter(|&j| self.delta[j]).map(|j| j + 1).collect()
    }

    pub fn count(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    /// No-good cut `Σ_{δ̄=1} δ − Σ_{δ̄=0} δ ≤ Σδ̄ − 1` over `delta` variables.
    pub fn no_good(&self, delta_vars: &[usize]) -> (Vec<(usize, f64)>, f64) {
        let coeffs = self
            .delta
            .iter()
            .zip(delta_vars)
            .map(|(&d, &k)| (k, if d { 1.0 } else { -1.0 }))
            .collect();
        (coeffs, self.count() as f64 - 1.0)
    }
}

impl std::fmt::Display for ActiveSetSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.active().iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", s.join(","))
    }
}

/// A game encoded as a MIP together with the maps needed to read results.
#[derive(Debug, Clone)]
pub struct GameMip {
    pub model: MipModel,
    pub map: VarMap,
    pub kkt: LqKKT,
    pub game: LQGame,
    pub design: Option<DesignObjective>,
    pub variational: bool,
    pub big_m: f64,
    pub cuts: Vec<ActiveSetSignature>,
}

impl GameMip {
    pub fn m(&self) -> usize {
        self.kkt.aug.rows()
    }

    pub fn n_lambda(&self) -> usize {
        self.map.lambda.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// Append the no-good cut excluding `sig`.
    pub fn add_cut(&mut self, sig: &ActiveSetSignature) {
        let (coeffs, rhs) = sig.no_good(&self.map.delta);
        let name = format!("CUT{}", self.cuts.len() + 1);
        self.model.add_row(name, coeffs, Sense::Le, rhs);
        self.cuts.push(sig.clone());
    }
}

/// Max-affine groups to minimize through epigraph variables, including
/// `α1 |x_k|` when requested.
fn pwa_groups(design: &DesignObjective, n: usize, n_p: usize) -> Vec<Vec<PwaPiece>> {
    let mut groups = design.pwa.clone();
    if design.alpha1 > 0.0 {
        for k in 0..n {
            let piece = |s: f64| {
                let mut d = DVector::zeros(n);
                d[k] = s * design.alpha1;
                PwaPiece {
                    d,
                    e: DVector::zeros(n_p),
                    h: 0.0,
                }
            };
            groups.push(vec![piece(1.0), piece(-1.0)]);
        }
    }
    groups
}

/// Encode the game (and optional design objective) as a mixed-integer
/// program with one binary per row of `Ā`.
pub fn build_mip(game: &LQGame, design: Option<&DesignObjective>, variational: bool, big_m: f64) -> Result<GameMip> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::InvalidGame(format!("big-M must be positive and finite, got {big_m}")));
    }
    validate_lq(game).into_result()?;
    let design = match design {
        Some(d) if d.nonlinear.is_some() => {
            return Err(Error::InvalidGame("a smooth design callback cannot be encoded as a MIP".into()))
        }
        Some(d) => {
            d.validate(game.n(), game.n_p()).into_result()?;
            Some(d.clone())
        }
        None => None,
    };
    let kkt = assemble_player_kkt(game);
    let aug = &kkt.aug;
    let n = game.n();
    let n_p = game.n_p();
    let m = aug.rows();
    let n_h = game.n_h();
    let (lo, hi) = game.bounds();
    let players = game.players();
    let mut model = MipModel::new(if variational { "gne_variational" } else { "gne" });

    let x0 = model.n_vars();
    for k in 0..n {
        model.add_var(format!("X{}", k + 1), lo[k], hi[k], false);
    }
    let p0 = model.n_vars();
    for k in 0..n_p {
        model.add_var(format!("P{}", k + 1), game.params.lower[k], game.params.upper[k], false);
    }
    let blocks = if variational { 1 } else { players };
    let mut lambda = vec![vec![None; m]; blocks];
    let mut mu = vec![vec![None; n_h]; blocks];
    for b in 0..blocks {
        let rows: Vec<usize> = if variational { (0..m).collect() } else { kkt.players[b].ineq_rows.clone() };
        for j in rows {
            lambda[b][j] = Some(model.add_var(format!("L{}_{}", b + 1, j + 1), 0.0, f64::INFINITY, false));
        }
    }
    for b in 0..blocks {
        let rows: Vec<usize> = if variational { (0..n_h).collect() } else { kkt.players[b].eq_rows.clone() };
        for j in rows {
            mu[b][j] = Some(model.add_var(
                format!("M{}_{}", b + 1, j + 1),
                f64::NEG_INFINITY,
                f64::INFINITY,
                false,
            ));
        }
    }
    let delta: Vec<usize> = (0..m).map(|j| model.add_var(format!("D{}", j + 1), 0.0, 1.0, true)).collect();
    let groups = design.as_ref().map(|d| pwa_groups(d, n, n_p)).unwrap_or_default();
    let sigma: Vec<usize> = (0..groups.len())
        .map(|g| model.add_var(format!("S{}", g + 1), f64::NEG_INFINITY, f64::INFINITY, false))
        .collect();

    // stationarity
    for pk in &kkt.players {
        let b = if variational { 0 } else { pk.player };
        for (r, k) in pk.vars.clone().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = (0..n).map(|c| (x0 + c, pk.q[(r, c)])).collect();
            coeffs.extend((0..n_p).map(|c| (p0 + c, pk.f[(r, c)])));
            for (jj, &j) in pk.ineq_rows.iter().enumerate() {
                coeffs.push((lambda[b][j].expect("player row has a multiplier"), pk.a[(jj, r)]));
            }
            for (jj, &j) in pk.eq_rows.iter().enumerate() {
                coeffs.push((mu[b][j].expect("player row has a multiplier"), pk.a_eq[(jj, r)]));
            }
            model.add_row(format!("STAT{}", k + 1), coeffs, Sense::Eq, -pk.c[r]);
        }
    }
    // primal feasibility
    let row_coeffs = |a: &DMatrix<f64>, s: &DMatrix<f64>, j: usize, sign: f64| -> Vec<(usize, f64)> {
        let mut c: Vec<(usize, f64)> = (0..n).map(|k| (x0 + k, sign * a[(j, k)])).collect();
        c.extend((0..n_p).map(|k| (p0 + k, -sign * s[(j, k)])));
        c
    };
    for j in 0..m {
        model.add_row(format!("PRIM{}", j + 1), row_coeffs(&aug.a_bar, &aug.s_bar, j, 1.0), Sense::Le, aug.b_bar[j]);
    }
    for j in 0..n_h {
        model.add_row(format!("EQ{}", j + 1), row_coeffs(&game.a_eq, &game.s_eq, j, 1.0), Sense::Eq, game.b_eq[j]);
    }
    // slack ≤ M(1 − δ)
    for j in 0..m {
        let mut c = row_coeffs(&aug.a_bar, &aug.s_bar, j, -1.0);
        c.push((delta[j], big_m));
        model.add_row(format!("BMS{}", j + 1), c, Sense::Le, big_m - aug.b_bar[j]);
    }
    // λ ≤ Mδ
    for (b, blk) in lambda.iter().enumerate() {
        for (j, v) in blk.iter().enumerate() {
            if let Some(v) = *v {
                model.add_row(format!("BML{}_{}", b + 1, j + 1), vec![(v, 1.0), (delta[j], -big_m)], Sense::Le, 0.0);
            }
        }
    }
    // epigraphs
    let mut e = 0;
    for (g, group) in groups.iter().enumerate() {
        model.objective[sigma[g]] = 1.0;
        for pc in group {
            e += 1;
            let mut c: Vec<(usize, f64)> = (0..n).map(|k| (x0 + k, pc.d[k])).collect();
            c.extend((0..n_p).map(|k| (p0 + k, pc.e[k])));
            c.push((sigma[g], -1.0));
            model.add_row(format!("EPI{e}"), c, Sense::Le, -pc.h);
        }
    }
    // quadratic part over (x, p)
    if let Some(d) = &design {
        let col = |c: usize| if c < n { x0 + c } else { p0 + c - n };
        if let Some((q, cj)) = &d.quad {
            for c in 0..n + n_p {
                model.objective[col(c)] += cj[c];
                for r in c..n + n_p {
                    let v = q[(r, c)];
                    if v != 0.0 {
                        model.quad.push((col(r), col(c), v));
                    }
                }
            }
        }
        if d.alpha2 > 0.0 {
            for k in 0..n {
                model.quad.push((x0 + k, x0 + k, 2.0 * d.alpha2));
            }
        }
        merge_quad(&mut model.quad);
    }

    Ok(GameMip {
        model,
        map: VarMap {
            x: x0..x0 + n,
            p: p0..p0 + n_p,
            lambda,
            mu,
            delta,
            sigma,
        },
        kkt,
        game: game.clone(),
        design,
        variational,
        big_m,
        cuts: Vec::new(),
    })
}

fn merge_quad(q: &mut Vec<(usize, usize, f64)>) {
    q.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(q.len());
    for &(r, c, v) in q.iter() {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|e| e.2 != 0.0);
    *q = out;
}
