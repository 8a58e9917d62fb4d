//! Joint KKT residual of all players.
//!
//! The unknown is `z = (x, λ, μ, v, y)`. Complementarity pairs are written
//! with the Fischer–Burmeister function, so `R(z, p) = 0` exactly when every
//! player's first-order conditions hold. Rows are ordered as stationarity
//! (by player), equalities, λ-complementarity (by multiplier block), lower
//! bound complementarity, upper bound complementarity.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::diff::{lift, Ad};
use crate::error::{Error, Result};
use crate::model::{DesignObjective, NonlinearGame, PlayerLayout};
use crate::nls::lm::{BoundedProblem, ExtraCost};

/// Smoothing used inside the residual: `φ_ε(a, b) = √(a² + b² + ε²) − a − b`.
pub const FB_EPS: f64 = 1e-10;

/// Fischer–Burmeister function `√(a² + b²) − a − b`.
pub fn fischer_burmeister(a: f64, b: f64) -> f64 {
    a.hypot(b) - a - b
}

/// Smoothed Fischer–Burmeister value.
pub fn fb_smooth(a: f64, b: f64) -> f64 {
    a.hypot(b).hypot(FB_EPS) - a - b
}

/// Partial derivatives `(∂φ_ε/∂a, ∂φ_ε/∂b)`.
pub fn fb_smooth_grad(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b).hypot(FB_EPS);
    (a / r - 1.0, b / r - 1.0)
}

/// Placement of every block of `z` and count of residual rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KKTLayout {
    pub players: PlayerLayout,
    pub n_g: usize,
    pub n_h: usize,
    pub variational: bool,
    /// Global indices of variables with a finite lower bound (one `v` each).
    pub v_index: Vec<usize>,
    /// Global indices of variables with a finite upper bound (one `y` each).
    pub y_index: Vec<usize>,
}

impl KKTLayout {
    pub fn new(
        players: PlayerLayout,
        n_g: usize,
        n_h: usize,
        lower: &[f64],
        upper: &[f64],
        variational: bool,
    ) -> Self {
        let v_index = (0..players.n()).filter(|&k| lower[k].is_finite()).collect();
        let y_index = (0..players.n()).filter(|&k| upper[k].is_finite()).collect();
        KKTLayout {
            players,
            n_g,
            n_h,
            variational,
            v_index,
            y_index,
        }
    }

    pub fn for_game(game: &NonlinearGame, variational: bool) -> Self {
        let (lo, hi) = game.bounds();
        Self::new(game.layout.clone(), game.n_g, game.n_h, &lo, &hi, variational)
    }

    pub fn n(&self) -> usize {
        self.players.n()
    }

    /// Number of multiplier blocks for shared constraints.
    pub fn blocks(&self) -> usize {
        if self.variational {
            1
        } else {
            self.players.players()
        }
    }

    fn block_of(&self, player: usize) -> usize {
        if self.variational {
            0
        } else {
            player
        }
    }

    pub fn x_range(&self) -> Range<usize> {
        0..self.n()
    }

    pub fn lambda_block(&self, b: usize) -> Range<usize> {
        let s = self.n() + b * self.n_g;
        s..s + self.n_g
    }

    /// λ used by player `i` (the shared block in variational mode).
    pub fn lambda_range(&self, i: usize) -> Range<usize> {
        self.lambda_block(self.block_of(i))
    }

    pub fn mu_block(&self, b: usize) -> Range<usize> {
        let s = self.n() + self.blocks() * self.n_g + b * self.n_h;
        s..s + self.n_h
    }

    pub fn mu_range(&self, i: usize) -> Range<usize> {
        self.mu_block(self.block_of(i))
    }

    pub fn v_range(&self) -> Range<usize> {
        let s = self.n() + self.blocks() * (self.n_g + self.n_h);
        s..s + self.v_index.len()
    }

    pub fn y_range(&self) -> Range<usize> {
        let s = self.v_range().end;
        s..s + self.y_index.len()
    }

    /// Length of `z`.
    pub fn total(&self) -> usize {
        self.y_range().end
    }

    /// Number of residual rows.
    pub fn residual_dim(&self) -> usize {
        self.n() + self.n_h + self.blocks() * self.n_g + self.v_index.len() + self.y_index.len()
    }

    /// One label per residual row, in row order.
    pub fn row_labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.residual_dim());
        for i in 0..self.players.players() {
            for (c, _) in self.players.range(i).enumerate() {
                out.push(format!("stationarity player {} var {}", i + 1, c + 1));
            }
        }
        for j in 0..self.n_h {
            out.push(format!("equality {}", j + 1));
        }
        for b in 0..self.blocks() {
            for j in 0..self.n_g {
                if self.variational {
                    out.push(format!("fb shared lambda {}", j + 1));
                } else {
                    out.push(format!("fb player {} lambda {}", b + 1, j + 1));
                }
            }
        }
        for &k in &self.v_index {
            out.push(format!("fb lower bound x{}", k + 1));
        }
        for &k in &self.y_index {
            out.push(format!("fb upper bound x{}", k + 1));
        }
        out
    }
}

/// Replace the per-player multiplier blocks by one shared block.
pub fn make_variational(layout: &KKTLayout) -> KKTLayout {
    let mut out = layout.clone();
    out.variational = true;
    out
}

/// Stacked primal–dual point.
#[derive(Debug, Clone, PartialEq)]
pub struct KKTVector {
    pub data: Vec<f64>,
    pub layout: KKTLayout,
}

impl KKTVector {
    pub fn new(layout: KKTLayout, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.total() {
            return Err(Error::Dimension(format!(
                "KKT vector has length {}, layout needs {}",
                data.len(),
                layout.total()
            )));
        }
        Ok(KKTVector { data, layout })
    }

    /// Point with primal part `x0` and duals `λ = v = y = 1`, `μ = 0`.
    pub fn initial(layout: KKTLayout, x0: &[f64]) -> Self {
        let mut data = vec![1.0; layout.total()];
        data[..layout.n()].copy_from_slice(x0);
        for b in 0..layout.blocks() {
            for k in layout.mu_block(b) {
                data[k] = 0.0;
            }
        }
        KKTVector { data, layout }
    }

    pub fn x(&self) -> &[f64] {
        &self.data[self.layout.x_range()]
    }
    pub fn lambda(&self, i: usize) -> &[f64] {
        &self.data[self.layout.lambda_range(i)]
    }
    pub fn mu(&self, i: usize) -> &[f64] {
        &self.data[self.layout.mu_range(i)]
    }
    pub fn v(&self) -> &[f64] {
        &self.data[self.layout.v_range()]
    }
    pub fn y(&self) -> &[f64] {
        &self.data[self.layout.y_range()]
    }

    /// Copy shared multipliers to every player (identity for non-variational points).
    pub fn expand_variational(&self) -> KKTVector {
        if !self.layout.variational {
            return self.clone();
        }
        let mut layout = self.layout.clone();
        layout.variational = false;
        let mut data = vec![0.0; layout.total()];
        data[..layout.n()].copy_from_slice(self.x());
        for i in 0..layout.players.players() {
            let r = layout.lambda_range(i);
            data[r].copy_from_slice(self.lambda(0));
            let r = layout.mu_range(i);
            data[r].copy_from_slice(self.mu(0));
        }
        let r = layout.v_range();
        data[r].copy_from_slice(self.v());
        let r = layout.y_range();
        data[r].copy_from_slice(self.y());
        KKTVector { data, layout }
    }
}

// first derivatives at (x, p): own-cost gradients, g, h and their x-Jacobians
struct FirstOrder {
    grad_own: Vec<f64>,
    g: Vec<f64>,
    jg: DMatrix<f64>,
    h: Vec<f64>,
    jh: DMatrix<f64>,
}

fn seeded(x: &[f64], p: &[f64], inner: usize, outer: Option<usize>) -> (Vec<Ad>, Vec<Ad>) {
    let n = x.len();
    let mut xs = lift(x);
    let mut ps = lift(p);
    xs[inner].value.deriv = 1.0;
    if let Some(c) = outer {
        if c < n {
            xs[c].deriv.value = 1.0;
        } else {
            ps[c - n].deriv.value = 1.0;
        }
    }
    (xs, ps)
}

fn check_len(v: &[Ad], want: usize, what: &str) -> Result<()> {
    if v.len() != want {
        return Err(Error::Dimension(format!("{what} returned {} values, expected {want}", v.len())));
    }
    Ok(())
}

fn first_order(game: &NonlinearGame, x: &[f64], p: &[f64]) -> Result<FirstOrder> {
    let n = x.len();
    let mut out = FirstOrder {
        grad_own: vec![0.0; n],
        g: game.g_values(x, p),
        jg: DMatrix::zeros(game.n_g, n),
        h: game.h_values(x, p),
        jh: DMatrix::zeros(game.n_h, n),
    };
    if out.g.len() != game.n_g || out.h.len() != game.n_h {
        return Err(Error::Dimension("constraint arity differs from declaration".into()));
    }
    for k in 0..n {
        let (xs, ps) = seeded(x, p, k, None);
        let owner = game.layout.owner(k);
        let d = (game.costs[owner])(&xs, &ps).d_inner();
        if !d.is_finite() {
            return Err(Error::NonFiniteDerivative { index: k });
        }
        out.grad_own[k] = d;
        if let Some(g) = &game.ineq {
            let v = g(&xs, &ps);
            check_len(&v, game.n_g, "inequality")?;
            for (j, a) in v.iter().enumerate() {
                out.jg[(j, k)] = a.d_inner();
            }
        }
        if let Some(h) = &game.eq {
            let v = h(&xs, &ps);
            check_len(&v, game.n_h, "equality")?;
            for (j, a) in v.iter().enumerate() {
                out.jh[(j, k)] = a.d_inner();
            }
        }
    }
    Ok(out)
}

/// Joint KKT residual `R(z, p)` in the documented row order.
pub fn residual(game: &NonlinearGame, z: &KKTVector, p: &[f64]) -> Result<Vec<f64>> {
    let lay = &z.layout;
    let x = z.x();
    let fo = first_order(game, x, p)?;
    let (lo, hi) = game.bounds();
    let mut r = Vec::with_capacity(lay.residual_dim());
    let mut v_of = vec![None; lay.n()];
    for (c, &k) in lay.v_index.iter().enumerate() {
        v_of[k] = Some(c);
    }
    let mut y_of = vec![None; lay.n()];
    for (c, &k) in lay.y_index.iter().enumerate() {
        y_of[k] = Some(c);
    }
    for i in 0..lay.players.players() {
        let lam = z.lambda(i);
        let mu = z.mu(i);
        for k in lay.players.range(i) {
            let mut s = fo.grad_own[k];
            for (j, l) in lam.iter().enumerate() {
                s += fo.jg[(j, k)] * l;
            }
            for (j, m) in mu.iter().enumerate() {
                s += fo.jh[(j, k)] * m;
            }
            if let Some(c) = v_of[k] {
                s -= z.v()[c];
            }
            if let Some(c) = y_of[k] {
                s += z.y()[c];
            }
            r.push(s);
        }
    }
    r.extend_from_slice(&fo.h);
    for b in 0..lay.blocks() {
        let lam = &z.data[lay.lambda_block(b)];
        for j in 0..lay.n_g {
            r.push(fb_smooth(lam[j], -fo.g[j]));
        }
    }
    for (c, &k) in lay.v_index.iter().enumerate() {
        r.push(fb_smooth(z.v()[c], x[k] - lo[k]));
    }
    for (c, &k) in lay.y_index.iter().enumerate() {
        r.push(fb_smooth(z.y()[c], hi[k] - x[k]));
    }
    if let Some(row) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResidual { row });
    }
    Ok(r)
}

/// Columns of the residual Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Z,
    ZAndP,
}

/// Exact Jacobian of [`residual`]; with [`Wrt::ZAndP`] the parameter
/// columns follow the `z` columns.
pub fn residual_jacobian(game: &NonlinearGame, z: &KKTVector, p: &[f64], wrt: Wrt) -> Result<DMatrix<f64>> {
    let lay = &z.layout;
    let x = z.x();
    let n = lay.n();
    let n_p = p.len();
    let ncols_w = match wrt {
        Wrt::Z => n,
        Wrt::ZAndP => n + n_p,
    };
    let fo = first_order(game, x, p)?;
    // second derivatives d²/dx_k dw_c of the owner's cost and of g, h
    let mut hf = DMatrix::zeros(n, ncols_w);
    let mut hg: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, ncols_w); game.n_g];
    let mut hh: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, ncols_w); game.n_h];
    let mut jg_w = DMatrix::zeros(game.n_g, ncols_w);
    let mut jh_w = DMatrix::zeros(game.n_h, ncols_w);
    for c in 0..ncols_w {
        for k in 0..n {
            let (xs, ps) = seeded(x, p, k, Some(c));
            let owner = game.layout.owner(k);
            let f = (game.costs[owner])(&xs, &ps);
            if !f.d_mixed().is_finite() {
                return Err(Error::NonFiniteDerivative { index: c });
            }
            hf[(k, c)] = f.d_mixed();
            if let Some(g) = &game.ineq {
                let v = g(&xs, &ps);
                check_len(&v, game.n_g, "inequality")?;
                for (j, a) in v.iter().enumerate() {
                    hg[j][(k, c)] = a.d_mixed();
                    if k == 0 {
                        jg_w[(j, c)] = a.d_outer();
                    }
                }
            }
            if let Some(h) = &game.eq {
                let v = h(&xs, &ps);
                check_len(&v, game.n_h, "equality")?;
                for (j, a) in v.iter().enumerate() {
                    hh[j][(k, c)] = a.d_mixed();
                    if k == 0 {
                        jh_w[(j, c)] = a.d_outer();
                    }
                }
            }
        }
    }
    // map residual w-columns (x then p) into the output column space
    let total = lay.total();
    let ncols = match wrt {
        Wrt::Z => total,
        Wrt::ZAndP => total + n_p,
    };
    let col_of = |c: usize| if c < n { c } else { total + (c - n) };
    let (lo, hi) = game.bounds();
    let mut jac = DMatrix::zeros(lay.residual_dim(), ncols);
    let mut row = 0;
    let mut v_of = vec![None; n];
    for (c, &k) in lay.v_index.iter().enumerate() {
        v_of[k] = Some(c);
    }
    let mut y_of = vec![None; n];
    for (c, &k) in lay.y_index.iter().enumerate() {
        y_of[k] = Some(c);
    }
    for i in 0..lay.players.players() {
        let lr = lay.lambda_range(i);
        let mr = lay.mu_range(i);
        let lam = z.lambda(i);
        let mu = z.mu(i);
        for k in lay.players.range(i) {
            for c in 0..ncols_w {
                let mut d = hf[(k, c)];
                for j in 0..game.n_g {
                    d += lam[j] * hg[j][(k, c)];
                }
                for j in 0..game.n_h {
                    d += mu[j] * hh[j][(k, c)];
                }
                jac[(row, col_of(c))] += d;
            }
            for j in 0..game.n_g {
                jac[(row, lr.start + j)] += fo.jg[(j, k)];
            }
            for j in 0..game.n_h {
                jac[(row, mr.start + j)] += fo.jh[(j, k)];
            }
            if let Some(c) = v_of[k] {
                jac[(row, lay.v_range().start + c)] = -1.0;
            }
            if let Some(c) = y_of[k] {
                jac[(row, lay.y_range().start + c)] = 1.0;
            }
            row += 1;
        }
    }
    for j in 0..game.n_h {
        for c in 0..ncols_w {
            jac[(row, col_of(c))] = jh_w[(j, c)];
        }
        row += 1;
    }
    for b in 0..lay.blocks() {
        let lr = lay.lambda_block(b);
        for j in 0..game.n_g {
            let (da, db) = fb_smooth_grad(z.data[lr.start + j], -fo.g[j]);
            jac[(row, lr.start + j)] = da;
            for c in 0..ncols_w {
                jac[(row, col_of(c))] -= db * jg_w[(j, c)];
            }
            row += 1;
        }
    }
    for (c, &k) in lay.v_index.iter().enumerate() {
        let (da, db) = fb_smooth_grad(z.v()[c], x[k] - lo[k]);
        jac[(row, lay.v_range().start + c)] = da;
        jac[(row, k)] += db;
        row += 1;
    }
    for (c, &k) in lay.y_index.iter().enumerate() {
        let (da, db) = fb_smooth_grad(z.y()[c], hi[k] - x[k]);
        jac[(row, lay.y_range().start + c)] = da;
        jac[(row, k)] -= db;
        row += 1;
    }
    if let Some((idx, _)) = jac.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteDerivative { index: idx / jac.nrows() });
    }
    Ok(jac)
}

/// Split `x = x_p − x_m` into nonnegative parts.
pub fn split(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().map(|v| v.max(0.0)).collect(), x.iter().map(|v| (-v).max(0.0)).collect())
}

pub fn recombine(xp: &[f64], xm: &[f64]) -> Vec<f64> {
    xp.iter().zip(xm).map(|(a, b)| a - b).collect()
}

/// Bounds on `(x_p, x_m)` implied by `ℓ ≤ x ≤ u`:
/// `max{0,ℓ} ≤ x_p ≤ max{0,u}` and `max{0,−u} ≤ x_m ≤ max{0,−ℓ}`.
pub fn tightened_bounds(lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let xp_lo = lower.iter().map(|l| l.max(0.0)).collect();
    let xp_hi = upper.iter().map(|u| u.max(0.0)).collect();
    let xm_lo = upper.iter().map(|u| (-u).max(0.0)).collect();
    let xm_hi = lower.iter().map(|l| (-l).max(0.0)).collect();
    (xp_lo, xp_hi, xm_lo, xm_hi)
}

/// Nonnegative split vector with tightened bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector {
    pub xp: Vec<f64>,
    pub xm: Vec<f64>,
    pub xp_bounds: (Vec<f64>, Vec<f64>),
    pub xm_bounds: (Vec<f64>, Vec<f64>),
}

impl SplitVector {
    pub fn from_x(x: &[f64], lower: &[f64], upper: &[f64]) -> Self {
        let (xp, xm) = split(x);
        let (a, b, c, d) = tightened_bounds(lower, upper);
        SplitVector {
            xp,
            xm,
            xp_bounds: (a, b),
            xm_bounds: (c, d),
        }
    }
    pub fn x(&self) -> Vec<f64> {
        recombine(&self.xp, &self.xm)
    }
}

/// Which objective form the ℓ1 problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitForm {
    /// `J ≡ 0`, `α2 > 0`: everything is one least-squares stack.
    PureLeastSquares,
    /// Smooth cost `J + α1 1ᵀ(x_p + x_m) + α2 (‖x_p‖² + ‖x_m‖²)` plus `ρ/2 ‖R‖²`.
    Composite,
}

/// Bound-constrained problem over `w = (p, x_p, x_m, ν)`.
pub struct SplitL1Problem<'a> {
    pub game: &'a NonlinearGame,
    pub design: &'a DesignObjective,
    pub rho: f64,
    pub layout: KKTLayout,
    pub form: SplitForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> SplitL1Problem<'a> {
    pub fn n_p(&self) -> usize {
        self.game.n_p()
    }
    pub fn n(&self) -> usize {
        self.layout.n()
    }
    fn n_dual(&self) -> usize {
        self.layout.total() - self.n()
    }
    pub fn alpha3(&self) -> f64 {
        (2.0 * self.design.alpha2).sqrt()
    }

    /// Pack `(p, z)` into `w`.
    pub fn pack(&self, p: &[f64], z: &KKTVector) -> Vec<f64> {
        let (xp, xm) = split(z.x());
        let mut w = Vec::with_capacity(self.dim());
        w.extend_from_slice(p);
        w.extend(xp);
        w.extend(xm);
        w.extend_from_slice(&z.data[self.n()..]);
        w
    }

    /// Unpack `w` into `(p, z)` with `x = x_p − x_m`.
    pub fn unpack(&self, w: &[f64]) -> (Vec<f64>, KKTVector) {
        let n_p = self.n_p();
        let n = self.n();
        let p = w[..n_p].to_vec();
        let mut data = recombine(&w[n_p..n_p + n], &w[n_p + n..n_p + 2 * n]);
        data.extend_from_slice(&w[n_p + 2 * n..]);
        (
            p,
            KKTVector {
                data,
                layout: self.layout.clone(),
            },
        )
    }
}

/// ℓ1-regularized design problem with `x` split into positive and negative parts.
pub fn split_l1<'a>(
    game: &'a NonlinearGame,
    design: &'a DesignObjective,
    rho: f64,
    variational: bool,
) -> Result<SplitL1Problem<'a>> {
    if !(design.alpha1 > 0.0) {
        return Err(Error::InvalidRegularization(format!(
            "alpha1 must be positive for the split formulation, got {}",
            design.alpha1
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidRegularization(format!("rho must be positive, got {rho}")));
    }
    if !design.pwa.is_empty() {
        return Err(Error::InvalidRegularization(
            "piecewise-affine design terms are not smooth; use the mixed-integer route".into(),
        ));
    }
    let layout = KKTLayout::for_game(game, variational);
    let (lo, hi) = game.bounds();
    let (xp_lo, xp_hi, xm_lo, xm_hi) = tightened_bounds(&lo, &hi);
    let n_dual = layout.total() - layout.n();
    let mut lower = game.params.lower.clone();
    lower.extend(xp_lo);
    lower.extend(xm_lo);
    lower.extend(std::iter::repeat(f64::NEG_INFINITY).take(n_dual));
    let mut upper = game.params.upper.clone();
    upper.extend(xp_hi);
    upper.extend(xm_hi);
    upper.extend(std::iter::repeat(f64::INFINITY).take(n_dual));
    let form = if design.is_zero() && design.alpha2 > 0.0 {
        SplitForm::PureLeastSquares
    } else {
        SplitForm::Composite
    };
    Ok(SplitL1Problem {
        game,
        design,
        rho,
        layout,
        form,
        lower,
        upper,
    })
}

impl BoundedProblem for SplitL1Problem<'_> {
    fn dim(&self) -> usize {
        self.n_p() + 2 * self.n() + self.n_dual()
    }
    fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }

    fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (p, z) = self.unpack(w);
        let sr = self.rho.sqrt();
        let r = residual(self.game, &z, &p)?;
        let mut out = Vec::new();
        if self.form == SplitForm::PureLeastSquares {
            let a3 = self.alpha3();
            let shift = self.design.alpha1 / a3;
            let n_p = self.n_p();
            for v in &w[n_p..n_p + 2 * self.n()] {
                out.push(a3 * v + shift);
            }
        }
        out.extend(r.iter().map(|v| sr * v));
        Ok(out)
    }

    fn jacobian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        let (p, z) = self.unpack(w);
        let n = self.n();
        let n_p = self.n_p();
        let total = self.layout.total();
        let jr = residual_jacobian(self.game, &z, &p, Wrt::ZAndP)?;
        let head = if self.form == SplitForm::PureLeastSquares { 2 * n } else { 0 };
        let mut jac = DMatrix::zeros(head + jr.nrows(), self.dim());
        let a3 = self.alpha3();
        for k in 0..head {
            jac[(k, n_p + k)] = a3;
        }
        let sr = self.rho.sqrt();
        for r in 0..jr.nrows() {
            let row = head + r;
            for c in 0..n_p {
                jac[(row, c)] = sr * jr[(r, total + c)];
            }
            for k in 0..n {
                let d = sr * jr[(r, k)];
                jac[(row, n_p + k)] = d;
                jac[(row, n_p + n + k)] = -d;
            }
            for c in n..total {
                jac[(row, n_p + 2 * n + (c - n))] = sr * jr[(r, c)];
            }
        }
        Ok(jac)
    }

    fn extra_cost(&self, w: &[f64]) -> Result<Option<ExtraCost>> {
        if self.form == SplitForm::PureLeastSquares {
            return Ok(None);
        }
        let n = self.n();
        let n_p = self.n_p();
        let (p, z) = self.unpack(w);
        let dim = self.dim();
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        let (mut value, gj, hj) = self.design.derivatives(z.x(), &p)?;
        // chain rule through x = x_p − x_m; design columns are (x, p)
        let map = |c: usize| -> Vec<(usize, f64)> {
            if c < n {
                vec![(n_p + c, 1.0), (n_p + n + c, -1.0)]
            } else {
                vec![(c - n, 1.0)]
            }
        };
        for c in 0..n + n_p {
            for &(wc, s) in &map(c) {
                grad[wc] += s * gj[c];
            }
            for d in 0..n + n_p {
                let h = hj[(c, d)];
                if h != 0.0 {
                    for &(wc, s) in &map(c) {
                        for &(wd, t) in &map(d) {
                            hess[(wc, wd)] += s * t * h;
                        }
                    }
                }
            }
        }
        let (a1, a2) = (self.design.alpha1, self.design.alpha2);
        for k in n_p..n_p + 2 * n {
            value += a1 * w[k] + a2 * w[k] * w[k];
            grad[k] += a1 + 2.0 * a2 * w[k];
            hess[(k, k)] += 2.0 * a2;
        }
        Ok(Some(ExtraCost { value, grad, hess }))
    }
}
