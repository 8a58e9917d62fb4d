//! Game descriptions: player layout, parameter box, nonlinear and
//! linear–quadratic games, design objectives and bound embedding.

use std::fmt;
use std::ops::AddAssign;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::diff::{lift, Ad, ScalarFn, VectorFn};
use crate::error::{Error, Result};
use crate::linalg;

/// Partition of the stacked decision vector `x = (x_1, …, x_N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
}

impl PlayerLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGame("at least one player is required".into()));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidGame(format!("player {} has no variables", i + 1)));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut n = 0;
        for &d in &dims {
            offsets.push(n);
            n += d;
        }
        Ok(PlayerLayout { dims, offsets, n })
    }

    /// `players` players with `dim` variables each.
    pub fn uniform(players: usize, dim: usize) -> Result<Self> {
        Self::new(vec![dim; players])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn players(&self) -> usize {
        self.dims.len()
    }
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.dims[i]
    }
    /// Player owning global variable `k`.
    pub fn owner(&self, k: usize) -> usize {
        match self.offsets.binary_search(&k) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }
}

/// Box `ℓ_p ≤ p ≤ u_p` of admissible parameters; `n_p = 0` means no parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ParamBox { lower, upper }
    }
    pub fn none() -> Self {
        ParamBox::default()
    }
    pub fn singleton(p: &[f64]) -> Self {
        ParamBox::new(p.to_vec(), p.to_vec())
    }
    pub fn n_p(&self) -> usize {
        self.lower.len()
    }

    /// A representative interior point: midpoint of finite sides, the finite
    /// end of half-infinite sides and 0 for free components.
    pub fn mid(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l,
                (false, true) => u,
                (false, false) => 0.0,
            })
            .collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.n_p()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
    }

    pub fn project(&self, p: &mut [f64]) {
        for (v, (&l, &u)) in p.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(l).min(u);
        }
    }
}

/// Per-player box `ℓ_i ≤ x_i ≤ u_i` over the player's own variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PlayerBox {
    pub fn free(dim: usize) -> Self {
        PlayerBox {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        PlayerBox { lower, upper }
    }
}

fn stacked_bounds(layout: &PlayerLayout, boxes: &[PlayerBox]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::NEG_INFINITY; layout.n()];
    let mut hi = vec![f64::INFINITY; layout.n()];
    for (i, b) in boxes.iter().enumerate().take(layout.players()) {
        for (c, k) in layout.range(i).enumerate() {
            if let Some(&l) = b.lower.get(c) {
                lo[k] = l;
            }
            if let Some(&u) = b.upper.get(c) {
                hi[k] = u;
            }
        }
    }
    (lo, hi)
}

/// Game given by differentiable callbacks.
///
/// Callbacks receive `(x, p)` over [`Ad`] scalars and must be written with
/// the operations of [`crate::diff::Scalar`] only.
#[derive(Clone)]
pub struct NonlinearGame {
    pub layout: PlayerLayout,
    pub costs: Vec<Arc<ScalarFn>>,
    pub ineq: Option<Arc<VectorFn>>,
    pub n_g: usize,
    pub eq: Option<Arc<VectorFn>>,
    pub n_h: usize,
    pub boxes: Vec<PlayerBox>,
    pub params: ParamBox,
}

impl fmt::Debug for NonlinearGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearGame")
            .field("layout", &self.layout)
            .field("n_g", &self.n_g)
            .field("n_h", &self.n_h)
            .field("boxes", &self.boxes)
            .field("params", &self.params)
            .finish()
    }
}

impl NonlinearGame {
    /// Unconstrained game with the given costs and no parameters.
    pub fn new(layout: PlayerLayout, costs: Vec<Arc<ScalarFn>>) -> Self {
        let boxes = layout.dims().iter().map(|&d| PlayerBox::free(d)).collect();
        NonlinearGame {
            layout,
            costs,
            ineq: None,
            n_g: 0,
            eq: None,
            n_h: 0,
            boxes,
            params: ParamBox::none(),
        }
    }

    pub fn with_ineq(mut self, n_g: usize, g: Arc<VectorFn>) -> Self {
        self.n_g = n_g;
        self.ineq = Some(g);
        self
    }

    pub fn with_eq(mut self, n_h: usize, h: Arc<VectorFn>) -> Self {
        self.n_h = n_h;
        self.eq = Some(h);
        self
    }

    pub fn with_box(mut self, player: usize, b: PlayerBox) -> Self {
        self.boxes[player] = b;
        self
    }

    pub fn with_params(mut self, params: ParamBox) -> Self {
        self.params = params;
        self
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }
    pub fn n_p(&self) -> usize {
        self.params.n_p()
    }

    /// Stacked lower and upper bounds on `x`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        stacked_bounds(&self.layout, &self.boxes)
    }

    pub fn cost(&self, i: usize, x: &[f64], p: &[f64]) -> f64 {
        (self.costs[i])(&lift(x), &lift(p)).val()
    }

    pub fn g_values(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        match &self.ineq {
            Some(g) => g(&lift(x), &lift(p)).iter().map(|v| v.val()).collect(),
            None => Vec::new(),
        }
    }

    pub fn h_values(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        match &self.eq {
            Some(h) => h(&lift(x), &lift(p)).iter().map(|v| v.val()).collect(),
            None => Vec::new(),
        }
    }

    /// Largest violation of shared constraints and boxes at `x`.
    pub fn infeasibility(&self, x: &[f64], p: &[f64]) -> f64 {
        let (lo, hi) = self.bounds();
        let mut v = 0.0_f64;
        for g in self.g_values(x, p) {
            v = v.max(g);
        }
        for h in self.h_values(x, p) {
            v = v.max(h.abs());
        }
        for k in 0..x.len() {
            v = v.max(lo[k] - x[k]).max(x[k] - hi[k]);
        }
        v
    }
}

/// List of problems found while validating a game.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
    fn push(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidGame(self.violations.join("; ")))
        }
    }
}

fn check_boxes(report: &mut ValidationReport, layout: &PlayerLayout, boxes: &[PlayerBox]) {
    if boxes.len() != layout.players() {
        report.push(format!("box count {} differs from player count {}", boxes.len(), layout.players()));
        return;
    }
    for (i, b) in boxes.iter().enumerate() {
        let d = layout.dims()[i];
        if b.lower.len() != d || b.upper.len() != d {
            report.push(format!("box dimension mismatch at player {}", i + 1));
            continue;
        }
        if b.lower.iter().chain(&b.upper).any(|v| v.is_nan()) {
            report.push(format!("box contains NaN at player {}", i + 1));
        }
        if b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
            report.push(format!("box inverted at player {}", i + 1));
        }
    }
}

fn check_params(report: &mut ValidationReport, params: &ParamBox) {
    if params.lower.len() != params.upper.len() {
        report.push("parameter bound length mismatch");
    } else if params.lower.iter().zip(&params.upper).any(|(l, u)| !(l <= u)) {
        report.push("parameter box inverted");
    }
}

/// Check dimensions, boxes and evaluability at the probe point `x = 0`, `p = mid(P)`.
pub fn validate_nonlinear(game: &NonlinearGame) -> ValidationReport {
    let mut report = ValidationReport::default();
    let layout = &game.layout;
    if game.costs.len() != layout.players() {
        report.push(format!(
            "cost count {} differs from player count {}",
            game.costs.len(),
            layout.players()
        ));
    }
    check_boxes(&mut report, layout, &game.boxes);
    check_params(&mut report, &game.params);
    if game.ineq.is_none() && game.n_g > 0 {
        report.push("inequality arity: n_g > 0 but no function given");
    }
    if game.eq.is_none() && game.n_h > 0 {
        report.push("equality arity: n_h > 0 but no function given");
    }
    if !report.is_ok() {
        return report;
    }
    let x = lift(&vec![0.0; layout.n()]);
    let p = lift(&game.params.mid());
    for (i, f) in game.costs.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(|| f(&x, &p).val())) {
            Ok(v) if v.is_finite() => {}
            Ok(_) => report.push(format!("cost of player {} is not finite at the probe point", i + 1)),
            Err(_) => report.push(format!("cost of player {} panicked at the probe point", i + 1)),
        }
    }
    let check_vec = |report: &mut ValidationReport, f: &Arc<VectorFn>, want: usize, what: &str| {
        match catch_unwind(AssertUnwindSafe(|| f(&x, &p))) {
            Ok(v) => {
                if v.len() != want {
                    report.push(format!("{what} arity: returned {} values, declared {want}", v.len()));
                } else if v.iter().any(|a| !a.val().is_finite()) {
                    report.push(format!("{what} is not finite at the probe point"));
                }
            }
            Err(_) => report.push(format!("{what} panicked at the probe point")),
        }
    };
    if let Some(g) = &game.ineq {
        check_vec(&mut report, g, game.n_g, "inequality");
    }
    if let Some(h) = &game.eq {
        check_vec(&mut report, h, game.n_h, "equality");
    }
    report
}

/// One affine piece `D x + E p + h` of a max-affine group.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaPiece {
    pub d: DVector<f64>,
    pub e: DVector<f64>,
    pub h: f64,
}

impl PwaPiece {
    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        let dx: f64 = self.d.iter().zip(x).map(|(a, b)| a * b).sum();
        let ep: f64 = self.e.iter().zip(p).map(|(a, b)| a * b).sum();
        dx + ep + self.h
    }
}

/// Norm used by inverse-game objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseNorm {
    Inf,
    One,
    Two,
}

/// Game-design objective `J(x, p)`: sum of max-affine groups, an optional
/// quadratic `½ wᵀ Q_J w + c_Jᵀ w` over `w = (x, p)`, an optional smooth
/// callback, and the regularization `α1 ‖x‖₁ + α2 ‖x‖₂²`.
#[derive(Clone, Default)]
pub struct DesignObjective {
    pub pwa: Vec<Vec<PwaPiece>>,
    pub quad: Option<(DMatrix<f64>, DVector<f64>)>,
    pub nonlinear: Option<Arc<ScalarFn>>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub reference: Option<Vec<f64>>,
}

impl fmt::Debug for DesignObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesignObjective")
            .field("pwa", &self.pwa)
            .field("quad", &self.quad)
            .field("nonlinear", &self.nonlinear.is_some())
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .field("reference", &self.reference)
            .finish()
    }
}

impl DesignObjective {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_fn(f: Arc<ScalarFn>) -> Self {
        DesignObjective {
            nonlinear: Some(f),
            ..Default::default()
        }
    }

    pub fn with_regularization(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    /// True when `J` (excluding regularization) is identically zero.
    pub fn is_zero(&self) -> bool {
        self.pwa.is_empty() && self.quad.is_none() && self.nonlinear.is_none()
    }

    pub fn pwa_value(&self, x: &[f64], p: &[f64]) -> f64 {
        self.pwa
            .iter()
            .map(|g| g.iter().map(|pc| pc.eval(x, p)).fold(f64::NEG_INFINITY, f64::max))
            .sum()
    }

    pub fn quad_value(&self, x: &[f64], p: &[f64]) -> f64 {
        match &self.quad {
            Some((q, c)) => {
                let w = DVector::from_iterator(x.len() + p.len(), x.iter().chain(p).cloned());
                0.5 * w.dot(&(q * &w)) + c.dot(&w)
            }
            None => 0.0,
        }
    }

    /// `J(x, p)` without the regularization term.
    pub fn value(&self, x: &[f64], p: &[f64]) -> f64 {
        let nl = self
            .nonlinear
            .as_ref()
            .map(|f| f(&lift(x), &lift(p)).val())
            .unwrap_or(0.0);
        self.pwa_value(x, p) + self.quad_value(x, p) + nl
    }

    /// Value, gradient and Hessian of `J` (without regularization) over
    /// `(x, p)`. Max-affine groups contribute the gradient of their active
    /// piece and no curvature.
    pub fn derivatives(&self, x: &[f64], p: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = x.len();
        let m = n + p.len();
        let mut value = 0.0;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for group in &self.pwa {
            let (best, v) = group
                .iter()
                .map(|pc| (pc, pc.eval(x, p)))
                .fold((None, f64::NEG_INFINITY), |acc, (pc, v)| if v > acc.1 { (Some(pc), v) } else { acc });
            if let Some(pc) = best {
                value += v;
                g.rows_mut(0, n).add_assign(&pc.d);
                g.rows_mut(n, p.len()).add_assign(&pc.e);
            }
        }
        if let Some((q, c)) = &self.quad {
            let w = DVector::from_iterator(m, x.iter().chain(p).cloned());
            let qw = q * &w;
            value += 0.5 * w.dot(&qw) + c.dot(&w);
            g += qw + c;
            h += q;
        }
        if let Some(f) = &self.nonlinear {
            let (v, gf, hf) = crate::diff::hessian_xp(&**f, x, p)?;
            value += v;
            g += gf;
            h += hf;
        }
        Ok((value, g, h))
    }

    /// `J(x, p) + α1 ‖x‖₁ + α2 ‖x‖₂²`.
    pub fn value_with_reg(&self, x: &[f64], p: &[f64]) -> f64 {
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let l2: f64 = x.iter().map(|v| v * v).sum();
        self.value(x, p) + self.alpha1 * l1 + self.alpha2 * l2
    }

    /// Check structural invariants for a game with `n` variables and `n_p` parameters.
    pub fn validate(&self, n: usize, n_p: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (j, g) in self.pwa.iter().enumerate() {
            if g.is_empty() {
                report.push(format!("design group {} is empty", j + 1));
            }
            for pc in g {
                if pc.d.len() != n || pc.e.len() != n_p {
                    report.push(format!("design group {} piece dimension mismatch", j + 1));
                }
            }
        }
        if let Some((q, c)) = &self.quad {
            let m = n + n_p;
            if q.nrows() != m || q.ncols() != m || c.len() != m {
                report.push("design quadratic dimension mismatch");
            } else {
                if linalg::asymmetry(q) > 1e-8 {
                    report.push("design Q_J not symmetric");
                }
                if linalg::min_sym_eigenvalue(q) < -1e-9 {
                    report.push("design Q_J not positive semidefinite");
                }
            }
        }
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) {
            report.push("regularization weights must be nonnegative");
        }
        report
    }
}

/// Design objective for the inverse problem of reaching `x_des`.
///
/// `Inf` and `One` give max-affine data, `Two` gives `½‖x − x_des‖²` as a
/// quadratic over `(x, p)` whose parameter block is zero.
pub fn build_inverse_objective(x_des: &[f64], norm: InverseNorm, n_p: usize) -> DesignObjective {
    let n = x_des.len();
    let unit = |k: usize, s: f64| {
        let mut d = DVector::zeros(n);
        d[k] = s;
        d
    };
    let zp = DVector::zeros(n_p);
    let mut obj = DesignObjective {
        reference: Some(x_des.to_vec()),
        ..Default::default()
    };
    match norm {
        InverseNorm::Inf => {
            let mut group = Vec::with_capacity(2 * n);
            for k in 0..n {
                group.push(PwaPiece { d: unit(k, 1.0), e: zp.clone(), h: -x_des[k] });
            }
            for k in 0..n {
                group.push(PwaPiece { d: unit(k, -1.0), e: zp.clone(), h: x_des[k] });
            }
            obj.pwa.push(group);
        }
        InverseNorm::One => {
            for k in 0..n {
                obj.pwa.push(vec![
                    PwaPiece { d: unit(k, 1.0), e: zp.clone(), h: -x_des[k] },
                    PwaPiece { d: unit(k, -1.0), e: zp.clone(), h: x_des[k] },
                ]);
            }
        }
        InverseNorm::Two => {
            let m = n + n_p;
            let mut q = DMatrix::zeros(m, m);
            let mut c = DVector::zeros(m);
            for k in 0..n {
                q[(k, k)] = 1.0;
                c[k] = -x_des[k];
            }
            obj.quad = Some((q, c));
        }
    }
    obj
}

/// Linear–quadratic game: `f_i = ½ xᵀQ^i x + (c^i + F^i p)ᵀ x` subject to
/// `A x ≤ b + S p`, `A_eq x = b_eq + S_eq p` and per-player boxes.
#[derive(Debug, Clone)]
pub struct LQGame {
    pub layout: PlayerLayout,
    pub q: Vec<DMatrix<f64>>,
    pub c: Vec<DVector<f64>>,
    pub f: Vec<DMatrix<f64>>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub s: DMatrix<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub s_eq: DMatrix<f64>,
    pub boxes: Vec<PlayerBox>,
    pub params: ParamBox,
    pub design: Option<DesignObjective>,
}

impl LQGame {
    /// Game without parameters, equalities or boxes.
    pub fn new(
        layout: PlayerLayout,
        q: Vec<DMatrix<f64>>,
        c: Vec<DVector<f64>>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Self {
        let n = layout.n();
        let players = layout.players();
        let n_g = a.nrows();
        let boxes = layout.dims().iter().map(|&d| PlayerBox::free(d)).collect();
        LQGame {
            layout,
            q,
            c,
            f: vec![DMatrix::zeros(n, 0); players],
            a,
            b,
            s: DMatrix::zeros(n_g, 0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            s_eq: DMatrix::zeros(0, 0),
            boxes,
            params: ParamBox::none(),
            design: None,
        }
    }

    /// Add parameters: resizes `F`, `S`, `S_eq` with zeros when needed.
    pub fn with_params(mut self, params: ParamBox) -> Self {
        let n_p = params.n_p();
        let n = self.n();
        for f in &mut self.f {
            if f.ncols() != n_p {
                *f = DMatrix::zeros(n, n_p);
            }
        }
        if self.s.ncols() != n_p {
            self.s = DMatrix::zeros(self.a.nrows(), n_p);
        }
        if self.s_eq.ncols() != n_p || self.s_eq.nrows() != self.a_eq.nrows() {
            self.s_eq = DMatrix::zeros(self.a_eq.nrows(), n_p);
        }
        self.params = params;
        self
    }

    pub fn with_eq(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.s_eq = DMatrix::zeros(a_eq.nrows(), self.n_p());
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_box(mut self, player: usize, b: PlayerBox) -> Self {
        self.boxes[player] = b;
        self
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }
    pub fn n_p(&self) -> usize {
        self.params.n_p()
    }
    pub fn n_g(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_h(&self) -> usize {
        self.a_eq.nrows()
    }
    pub fn players(&self) -> usize {
        self.layout.players()
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        stacked_bounds(&self.layout, &self.boxes)
    }

    pub fn cost(&self, i: usize, x: &[f64], p: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let pv = DVector::from_column_slice(p);
        let lin = &self.c[i] + &self.f[i] * &pv;
        0.5 * xv.dot(&(&self.q[i] * &xv)) + lin.dot(&xv)
    }

    /// Largest violation of `A x ≤ b + S p`, equalities and boxes.
    pub fn infeasibility(&self, x: &[f64], p: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let pv = DVector::from_column_slice(p);
        let mut v = 0.0_f64;
        if self.n_g() > 0 {
            let r = &self.a * &xv - &self.b - &self.s * &pv;
            v = v.max(r.max());
        }
        if self.n_h() > 0 {
            let r = &self.a_eq * &xv - &self.b_eq - &self.s_eq * &pv;
            v = v.max(r.amax());
        }
        let (lo, hi) = self.bounds();
        for k in 0..x.len() {
            v = v.max(lo[k] - x[k]).max(x[k] - hi[k]);
        }
        v
    }

    /// Same game written with callbacks, for the least-squares route.
    pub fn to_nonlinear(&self) -> NonlinearGame {
        let costs: Vec<Arc<ScalarFn>> = (0..self.players())
            .map(|i| {
                let q = self.q[i].clone();
                let c = self.c[i].clone();
                let f = self.f[i].clone();
                let cost: Arc<ScalarFn> = Arc::new(move |x: &[Ad], p: &[Ad]| {
                    let n = x.len();
                    let mut total = Ad::cst(0.0);
                    for r in 0..n {
                        let mut row = Ad::cst(c[r]);
                        for k in 0..n {
                            let qv = q[(r, k)];
                            if qv != 0.0 {
                                row += x[k] * (0.5 * qv);
                            }
                        }
                        for (k, pk) in p.iter().enumerate() {
                            let fv = f[(r, k)];
                            if fv != 0.0 {
                                row += *pk * fv;
                            }
                        }
                        total += row * x[r];
                    }
                    total
                });
                cost
            })
            .collect();
        let mut game = NonlinearGame::new(self.layout.clone(), costs);
        game.boxes = self.boxes.clone();
        game.params = self.params.clone();
        if self.n_g() > 0 {
            let (a, b, s) = (self.a.clone(), self.b.clone(), self.s.clone());
            game = game.with_ineq(self.n_g(), Arc::new(move |x: &[Ad], p: &[Ad]| affine_rows(&a, &b, &s, x, p)));
        }
        if self.n_h() > 0 {
            let (a, b, s) = (self.a_eq.clone(), self.b_eq.clone(), self.s_eq.clone());
            game = game.with_eq(self.n_h(), Arc::new(move |x: &[Ad], p: &[Ad]| affine_rows(&a, &b, &s, x, p)));
        }
        game
    }
}

// rows of A x − b − S p
fn affine_rows(a: &DMatrix<f64>, b: &DVector<f64>, s: &DMatrix<f64>, x: &[Ad], p: &[Ad]) -> Vec<Ad> {
    (0..a.nrows())
        .map(|j| {
            let mut v = Ad::cst(-b[j]);
            for (k, xk) in x.iter().enumerate() {
                let c = a[(j, k)];
                if c != 0.0 {
                    v += *xk * c;
                }
            }
            for (k, pk) in p.iter().enumerate() {
                let c = s[(j, k)];
                if c != 0.0 {
                    v -= *pk * c;
                }
            }
            v
        })
        .collect()
}

/// Symmetrize every `Q^i` in place; returns the largest asymmetry seen.
pub fn symmetrize(game: &mut LQGame) -> f64 {
    let mut worst = 0.0_f64;
    for q in &mut game.q {
        if q.is_square() {
            worst = worst.max(linalg::asymmetry(q));
            *q = (&*q + q.transpose()) * 0.5;
        }
    }
    worst
}

/// Dimension, symmetry and convexity checks for an LQ game.
pub fn validate_lq(game: &LQGame) -> ValidationReport {
    let mut report = ValidationReport::default();
    let layout = &game.layout;
    let n = layout.n();
    let n_p = game.params.n_p();
    let players = layout.players();
    let n_g = game.a.nrows();
    let n_h = game.a_eq.nrows();
    if game.q.len() != players || game.c.len() != players || game.f.len() != players {
        report.push("cost data count differs from player count");
    }
    for (i, q) in game.q.iter().enumerate() {
        if q.nrows() != n || q.ncols() != n {
            report.push(format!("Q of player {} has shape {}x{}, expected {n}x{n}", i + 1, q.nrows(), q.ncols()));
            continue;
        }
        if linalg::asymmetry(q) > 1e-8 {
            report.push(format!("Q of player {} not symmetric", i + 1));
        }
        let r = layout.range(i);
        let block = q.view((r.start, r.start), (r.len(), r.len())).clone_owned();
        if linalg::min_sym_eigenvalue(&block) < -1e-9 {
            report.push(format!("Q block not PSD for player {}", i + 1));
        }
    }
    for (i, c) in game.c.iter().enumerate() {
        if c.len() != n {
            report.push(format!("c of player {} has length {}, expected {n}", i + 1, c.len()));
        }
    }
    for (i, f) in game.f.iter().enumerate() {
        if f.nrows() != n || f.ncols() != n_p {
            report.push(format!("F of player {} has wrong shape", i + 1));
        }
    }
    if game.a.ncols() != n && n_g > 0 {
        report.push(format!("A column count {} differs from n = {n}", game.a.ncols()));
    }
    if game.b.len() != n_g {
        report.push("b length differs from rows of A");
    }
    if game.s.nrows() != n_g || game.s.ncols() != n_p {
        report.push("S has wrong shape");
    }
    if game.a_eq.ncols() != n && n_h > 0 {
        report.push(format!("A_eq column count {} differs from n = {n}", game.a_eq.ncols()));
    }
    if game.b_eq.len() != n_h {
        report.push("b_eq length differs from rows of A_eq");
    }
    if n_h > 0 && (game.s_eq.nrows() != n_h || game.s_eq.ncols() != n_p) {
        report.push("S_eq has wrong shape");
    }
    let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
    if !finite(&game.a) || !game.b.iter().all(|v| v.is_finite()) {
        report.push("A or b has non-finite entries");
    }
    check_boxes(&mut report, layout, &game.boxes);
    check_params(&mut report, &game.params);
    if let Some(d) = &game.design {
        report.violations.extend(d.validate(n, n_p).violations);
    }
    report
}

/// Origin of a row of the augmented inequality system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    Shared(usize),
    Upper { player: usize, k: usize },
    Lower { player: usize, k: usize },
}

impl RowOrigin {
    /// Global index of the bounded variable, if this is a bound row.
    pub fn variable(&self, layout: &PlayerLayout) -> Option<usize> {
        match *self {
            RowOrigin::Shared(_) => None,
            RowOrigin::Upper { player, k } | RowOrigin::Lower { player, k } => Some(layout.offsets()[player] + k),
        }
    }
}

/// `Ā x ≤ b̄ + S̄ p` with finite bounds folded in as `[A; I_u; −I_ℓ]`.
#[derive(Debug, Clone)]
pub struct AugmentedInequalities {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DVector<f64>,
    pub s_bar: DMatrix<f64>,
    pub row_origin: Vec<RowOrigin>,
}

impl AugmentedInequalities {
    pub fn rows(&self) -> usize {
        self.row_origin.len()
    }

    /// Slack `b̄ + S̄ p − Ā x` per row.
    pub fn slack(&self, x: &[f64], p: &[f64]) -> DVector<f64> {
        let xv = DVector::from_column_slice(x);
        let pv = DVector::from_column_slice(p);
        &self.b_bar + &self.s_bar * pv - &self.a_bar * xv
    }
}

pub fn augment_bounds(game: &LQGame) -> AugmentedInequalities {
    let n = game.n();
    let n_p = game.n_p();
    let (lo, hi) = game.bounds();
    let mut origin: Vec<RowOrigin> = (0..game.n_g()).map(RowOrigin::Shared).collect();
    let layout = &game.layout;
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    for k in 0..n {
        let player = layout.owner(k);
        let local = k - layout.offsets()[player];
        if hi[k].is_finite() {
            uppers.push((k, RowOrigin::Upper { player, k: local }));
        }
        if lo[k].is_finite() {
            lowers.push((k, RowOrigin::Lower { player, k: local }));
        }
    }
    let m = game.n_g() + uppers.len() + lowers.len();
    let mut a_bar = DMatrix::zeros(m, n);
    let mut b_bar = DVector::zeros(m);
    let mut s_bar = DMatrix::zeros(m, n_p);
    if game.n_g() > 0 {
        a_bar.view_mut((0, 0), (game.n_g(), n)).copy_from(&game.a);
        b_bar.rows_mut(0, game.n_g()).copy_from(&game.b);
        if n_p > 0 {
            s_bar.view_mut((0, 0), (game.n_g(), n_p)).copy_from(&game.s);
        }
    }
    let mut r = game.n_g();
    for (k, o) in uppers {
        a_bar[(r, k)] = 1.0;
        b_bar[r] = hi[k];
        origin.push(o);
        r += 1;
    }
    for (k, o) in lowers {
        a_bar[(r, k)] = -1.0;
        b_bar[r] = -lo[k];
        origin.push(o);
        r += 1;
    }
    AugmentedInequalities { a_bar, b_bar, s_bar, row_origin: origin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    fn one_var_game() -> LQGame {
        let layout = PlayerLayout::new(vec![1]).unwrap();
        LQGame::new(
            layout,
            vec![DMatrix::identity(1, 1)],
            vec![DVector::zeros(1)],
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
    }

    #[test]
    fn layout_offsets() {
        let l = PlayerLayout::new(vec![2, 1, 3]).unwrap();
        assert_eq!(l.offsets(), &[0, 2, 3]);
        assert_eq!(l.n(), 6);
        assert_eq!(l.owner(0), 0);
        assert_eq!(l.owner(2), 1);
        assert_eq!(l.owner(5), 2);
        assert!(PlayerLayout::new(vec![]).is_err());
        assert!(PlayerLayout::new(vec![1, 0]).is_err());
    }

    #[test]
    fn minimal_nonlinear_game_is_valid() {
        let layout = PlayerLayout::new(vec![1]).unwrap();
        let g = NonlinearGame::new(layout, vec![Arc::new(|x: &[Ad], _: &[Ad]| x[0] * x[0] * 0.5)]);
        assert!(validate_nonlinear(&g).is_ok());
    }

    #[test]
    fn inverted_box_is_reported() {
        let layout = PlayerLayout::new(vec![1]).unwrap();
        let g = NonlinearGame::new(layout, vec![Arc::new(|x: &[Ad], _: &[Ad]| x[0] * x[0] * 0.5)])
            .with_box(0, PlayerBox::new(vec![1.0], vec![0.0]));
        let r = validate_nonlinear(&g);
        assert_eq!(r.violations, vec!["box inverted at player 1".to_string()]);
    }

    #[test]
    fn inequality_arity_is_reported() {
        let layout = PlayerLayout::new(vec![1]).unwrap();
        let g = NonlinearGame::new(layout, vec![Arc::new(|x: &[Ad], _: &[Ad]| x[0] * x[0])])
            .with_ineq(4, Arc::new(|x: &[Ad], _: &[Ad]| vec![x[0]; 3]));
        let r = validate_nonlinear(&g);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].starts_with("inequality arity"));
    }

    #[test]
    fn panicking_callback_is_reported() {
        let layout = PlayerLayout::new(vec![1]).unwrap();
        let g = NonlinearGame::new(layout, vec![Arc::new(|x: &[Ad], _: &[Ad]| x[5])]);
        let r = validate_nonlinear(&g);
        assert!(!r.is_ok());
    }

    #[test]
    fn reference_game_validates() {
        assert!(validate_lq(&instances::reference_lq_game()).is_ok());
    }

    #[test]
    fn negative_block_is_reported() {
        let mut g = one_var_game();
        g.q[0][(0, 0)] = -1.0;
        let r = validate_lq(&g);
        assert_eq!(r.violations, vec!["Q block not PSD for player 1".to_string()]);
    }

    #[test]
    fn wrong_a_columns_are_reported() {
        let mut g = instances::reference_lq_game();
        g.a = g.a.columns(0, 5).clone_owned();
        let r = validate_lq(&g);
        assert!(r.violations.iter().any(|v| v.starts_with("A column count")));
    }

    #[test]
    fn augment_without_bounds_keeps_a() {
        let g = instances::reference_lq_game();
        let aug = augment_bounds(&g);
        assert_eq!(aug.a_bar, g.a);
        assert_eq!(aug.rows(), 4);
    }

    #[test]
    fn augment_unit_box() {
        let g = one_var_game().with_box(0, PlayerBox::new(vec![0.0], vec![1.0]));
        let aug = augment_bounds(&g);
        assert_eq!(aug.a_bar, DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
        assert_eq!(aug.b_bar.as_slice(), &[1.0, 0.0]);
        assert_eq!(
            aug.row_origin,
            vec![RowOrigin::Upper { player: 0, k: 0 }, RowOrigin::Lower { player: 0, k: 0 }]
        );
    }

    #[test]
    fn augment_partial_bounds() {
        let layout = PlayerLayout::new(vec![2]).unwrap();
        let g = LQGame::new(
            layout,
            vec![DMatrix::identity(2, 2)],
            vec![DVector::zeros(2)],
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .with_box(0, PlayerBox::new(vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY, 2.0]));
        let aug = augment_bounds(&g);
        assert_eq!(aug.rows(), 1);
        assert_eq!(aug.a_bar, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
        assert_eq!(aug.b_bar[0], 2.0);
    }

    #[test]
    fn inverse_inf_objective() {
        let d = build_inverse_objective(&[0.0, 0.0], InverseNorm::Inf, 0);
        assert_eq!(d.pwa.len(), 1);
        assert_eq!(d.pwa[0].len(), 4);
        let ds: Vec<Vec<f64>> = d.pwa[0].iter().map(|p| p.d.as_slice().to_vec()).collect();
        assert_eq!(ds, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]);
        assert!(d.pwa[0].iter().all(|p| p.h == 0.0));
    }

    #[test]
    fn inverse_one_objective() {
        let d = build_inverse_objective(&[1.0, -1.0], InverseNorm::One, 0);
        assert_eq!(d.pwa.len(), 2);
        assert!(d.pwa.iter().all(|g| g.len() == 2));
        assert_eq!(d.pwa[0][0].h, -1.0);
        assert_eq!(d.pwa[0][1].h, 1.0);
        assert_eq!(d.value(&[3.0, 0.5], &[]), 2.0 + 1.5);
    }

    #[test]
    fn inverse_two_objective() {
        let d = build_inverse_objective(&[0.0, 0.0], InverseNorm::Two, 1);
        let (q, c) = d.quad.as_ref().unwrap();
        assert_eq!(q, &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0])));
        assert_eq!(c.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(d.value(&[0.0, 0.0], &[7.0]), 0.0);
        assert_eq!(d.value(&[1.0, 2.0], &[7.0]), 2.5);
    }

    #[test]
    fn lq_costs_agree_with_callbacks() {
        let g = instances::reference_lq_game();
        let nl = g.to_nonlinear();
        let x = [0.3, -1.0, 2.0, 0.1, 0.0, -0.5];
        for i in 0..3 {
            assert!((g.cost(i, &x, &[]) - nl.cost(i, &x, &[])).abs() < 1e-12);
        }
        let gv = nl.g_values(&x, &[]);
        let direct = &g.a * DVector::from_column_slice(&x) - &g.b;
        assert!((DVector::from_vec(gv) - direct).amax() < 1e-12);
    }
}
