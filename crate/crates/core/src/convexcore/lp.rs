//! Dense two-phase simplex.
//!
//! Variables are shifted or reflected onto `s ≥ 0` (free variables are split),
//! finite upper bounds of lower-bounded variables become extra rows, and
//! artificial columns start phase 1. Pricing is Dantzig's rule and switches to
//! Bland's rule after a run of degenerate pivots. Once optimal, the basic
//! solution and the duals are recomputed from an LU factorization of the basis.

use nalgebra::{DMatrix, DVector};

use super::{ConvexResult, ConvexStatus, LPProblem};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = off + s`
    Shift { col: usize, off: f64 },
    /// `x = off − s`
    Reflect { col: usize, off: f64 },
    /// `x = s⁺ − s⁻`
    Split { pos: usize, neg: usize },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Ineq(usize),
    Eq(usize),
    Bound,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows) × (cols + 1), last column is the right-hand side
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }
    fn rhs(&self, r: usize) -> f64 {
        self.t[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.t[pr * w + pc];
        for c in 0..w {
            self.t[pr * w + c] *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f != 0.0 {
                let row = &mut self.t[r * w..(r + 1) * w];
                for (a, b) in row.iter_mut().zip(&prow) {
                    *a -= f * b;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (a, b) in self.obj.iter_mut().zip(&prow) {
                *a -= f * b;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Set the objective row to reduced costs of `cost`.
    fn price(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.obj[c] -= cb * self.t[r * w + c];
                }
            }
        }
    }

    /// Run simplex iterations over columns allowed by `allowed`.
    /// Returns `Ok(true)` at optimality, `Ok(false)` when unbounded.
    fn optimize(&mut self, allowed: &[bool], max_iter: usize) -> Result<bool, ()> {
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 20;
            let mut enter = None;
            let mut best = -COST_TOL;
            for c in 0..self.cols {
                if !allowed[c] {
                    continue;
                }
                let d = self.obj[c];
                if d < best || (bland && d < -COST_TOL && enter.is_none()) {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = enter else { return Ok(true) };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[l]
                                } else {
                                    a > self.at(l, e)
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(r);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(l) = leave else { return Ok(false) };
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(l, e);
        }
        Err(())
    }
}

/// Solve `min cᵀx s.t. A_ub x ≤ b_ub, A_eq x = b_eq, lower ≤ x ≤ upper`.
pub fn solve_lp(prob: &LPProblem) -> ConvexResult {
    let n = prob.c.len();
    let m_ub = prob.a_ub.nrows();
    let m_eq = prob.a_eq.nrows();
    if prob.lower.iter().zip(&prob.upper).any(|(l, u)| l > u) {
        return ConvexResult::failed(ConvexStatus::Infeasible, n, m_ub, m_eq);
    }

    // variable substitution
    let mut maps = Vec::with_capacity(n);
    let mut ncol = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (prob.lower[j], prob.upper[j]);
        let map = if l.is_finite() && u.is_finite() && l == u {
            VarMap::Fixed(l)
        } else if l.is_finite() {
            if u.is_finite() {
                bound_rows.push((ncol, u - l));
            }
            ncol += 1;
            VarMap::Shift { col: ncol - 1, off: l }
        } else if u.is_finite() {
            ncol += 1;
            VarMap::Reflect { col: ncol - 1, off: u }
        } else {
            ncol += 2;
            VarMap::Split { pos: ncol - 2, neg: ncol - 1 }
        };
        maps.push(map);
    }
    let n_struct = ncol;

    // rows in the substituted variables: coefficients, rhs, has slack
    let mut kinds = Vec::new();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let substitute = |coef: &dyn Fn(usize) -> f64, rhs: f64| -> (Vec<f64>, f64) {
        let mut a = vec![0.0; n_struct];
        let mut b = rhs;
        for j in 0..n {
            let v = coef(j);
            if v == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, off } => {
                    a[col] += v;
                    b -= v * off;
                }
                VarMap::Reflect { col, off } => {
                    a[col] -= v;
                    b -= v * off;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
                VarMap::Fixed(val) => b -= v * val,
            }
        }
        (a, b)
    };
    for i in 0..m_ub {
        rows.push(substitute(&|j| prob.a_ub[(i, j)], prob.b_ub[i]));
        kinds.push(RowKind::Ineq(i));
    }
    for &(col, width) in &bound_rows {
        let mut a = vec![0.0; n_struct];
        a[col] = 1.0;
        rows.push((a, width));
        kinds.push(RowKind::Bound);
    }
    for i in 0..m_eq {
        rows.push(substitute(&|j| prob.a_eq[(i, j)], prob.b_eq[i]));
        kinds.push(RowKind::Eq(i));
    }
    let m = rows.len();

    // rows with a slack get one column; flipped or equality rows get an artificial
    let n_slack = kinds.iter().filter(|k| !matches!(k, RowKind::Eq(_))).count();
    let sigma: Vec<f64> = rows.iter().map(|(_, b)| if *b < 0.0 { -1.0 } else { 1.0 }).collect();
    let needs_art: Vec<bool> = (0..m)
        .map(|r| matches!(kinds[r], RowKind::Eq(_)) || sigma[r] < 0.0)
        .collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let cols = n_struct + n_slack + n_art;
    let w = cols + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut slack_col = vec![None; m];
    let mut s_next = n_struct;
    let mut a_next = n_struct + n_slack;
    for r in 0..m {
        let (a, b) = &rows[r];
        let s = sigma[r];
        for c in 0..n_struct {
            t[r * w + c] = s * a[c];
        }
        t[r * w + cols] = s * b;
        if !matches!(kinds[r], RowKind::Eq(_)) {
            t[r * w + s_next] = s;
            slack_col[r] = Some(s_next);
            if s > 0.0 {
                basis[r] = s_next;
            }
            s_next += 1;
        }
        if needs_art[r] {
            t[r * w + a_next] = 1.0;
            basis[r] = a_next;
            a_next += 1;
        }
    }
    let a_std = t.clone();
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        obj: vec![0.0; w],
        basis,
    };
    let is_art = |c: usize| c >= n_struct + n_slack;
    let max_iter = 50 * (m + cols) + 1000;

    // phase 1
    if n_art > 0 {
        let cost: Vec<f64> = (0..cols).map(|c| if is_art(c) { 1.0 } else { 0.0 }).collect();
        tab.price(&cost);
        let allowed = vec![true; cols];
        if tab.optimize(&allowed, max_iter).is_err() {
            return ConvexResult::failed(ConvexStatus::IterationLimit, n, m_ub, m_eq);
        }
        let bscale = 1.0 + rows.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        let infeas: f64 = (0..m).filter(|&r| is_art(tab.basis[r])).map(|r| tab.rhs(r)).sum();
        if infeas > 1e-9 * bscale {
            return ConvexResult::failed(ConvexStatus::Infeasible, n, m_ub, m_eq);
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if is_art(tab.basis[r]) {
                let best = (0..n_struct + n_slack)
                    .filter(|&c| tab.at(r, c).abs() > PIVOT_TOL)
                    .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
                if let Some(c) = best {
                    tab.pivot(r, c);
                }
            }
        }
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    for j in 0..n {
        let cj = prob.c[j];
        match maps[j] {
            VarMap::Shift { col, .. } => cost[col] += cj,
            VarMap::Reflect { col, .. } => cost[col] -= cj,
            VarMap::Split { pos, neg } => {
                cost[pos] += cj;
                cost[neg] -= cj;
            }
            VarMap::Fixed(_) => {}
        }
    }
    tab.price(&cost);
    let allowed: Vec<bool> = (0..cols).map(|c| !is_art(c)).collect();
    match tab.optimize(&allowed, max_iter) {
        Ok(true) => {}
        Ok(false) => return ConvexResult::failed(ConvexStatus::Unbounded, n, m_ub, m_eq),
        Err(()) => return ConvexResult::failed(ConvexStatus::IterationLimit, n, m_ub, m_eq),
    }

    // basic solution and duals from the original standard-form columns
    let mut s_val = vec![0.0; cols];
    let mut y = DVector::zeros(m);
    if m > 0 {
        let bmat = DMatrix::from_fn(m, m, |r, k| a_std[r * w + tab.basis[k]]);
        let rhs = DVector::from_fn(m, |r, _| a_std[r * w + cols]);
        let cb = DVector::from_fn(m, |k, _| cost[tab.basis[k]]);
        let lu = bmat.clone().lu();
        let xb = lu.solve(&rhs);
        let yv = bmat.transpose().lu().solve(&cb);
        match (xb, yv) {
            (Some(xb), Some(yv)) => {
                for k in 0..m {
                    s_val[tab.basis[k]] = xb[k];
                }
                y = yv;
            }
            _ => {
                for r in 0..m {
                    s_val[tab.basis[r]] = tab.rhs(r);
                }
                // reduced costs of slack columns give the duals directly
                for r in 0..m {
                    if let Some(sc) = slack_col[r] {
                        y[r] = -tab.obj[sc] * sigma[r];
                    }
                }
            }
        }
    }
    let mut x = DVector::zeros(n);
    for j in 0..n {
        x[j] = match maps[j] {
            VarMap::Shift { col, off } => off + s_val[col].max(0.0),
            VarMap::Reflect { col, off } => off - s_val[col].max(0.0),
            VarMap::Split { pos, neg } => s_val[pos] - s_val[neg],
            VarMap::Fixed(v) => v,
        };
        x[j] = x[j].max(prob.lower[j]).min(prob.upper[j]);
    }
    let mut lambda = DVector::zeros(m_ub);
    let mut mu = DVector::zeros(m_eq);
    for r in 0..m {
        match kinds[r] {
            RowKind::Ineq(i) => lambda[i] = (-sigma[r] * y[r]).max(0.0),
            RowKind::Eq(i) => mu[i] = -sigma[r] * y[r],
            RowKind::Bound => {}
        }
    }
    ConvexResult::from_primal_dual(prob, None, x, lambda, mu, ConvexStatus::Optimal)
}
