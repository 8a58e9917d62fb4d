//! Depth-first branch and bound over the binaries of a [`MipModel`].
//!
//! Each node fixes some binaries; a small presolve substitutes fixed
//! variables and turns single-variable rows into bounds before the LP (or QP)
//! relaxation is solved. Integral nodes are re-solved with every binary fixed
//! so returned points satisfy the rows exactly. A rounding heuristic tries a
//! leaf at each node.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use super::model::{MipModel, Sense};
use crate::convexcore::{solve_lp, solve_qp, ConvexStatus, LPProblem, QPProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub node_limit: usize,
    pub int_tol: f64,
    /// Relative optimality gap for pruning.
    pub gap: f64,
    pub heuristic: bool,
    /// Binary assignments (one value per binary, in variable order) tried as
    /// leaves before the root is solved.
    pub hints: Vec<Vec<bool>>,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            node_limit: 100_000,
            int_tol: 1e-6,
            gap: 1e-9,
            heuristic: true,
            hints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
}

const FEAS_TOL: f64 = 1e-9;

enum Relaxation {
    Infeasible,
    Unbounded,
    Solved { values: Vec<f64>, objective: f64 },
}

/// Solve the continuous relaxation with the given variable bounds.
fn relax(model: &MipModel, lower: &[f64], upper: &[f64]) -> Relaxation {
    let nv = model.n_vars();
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut active = vec![true; model.rows.len()];
    // presolve: single free variable rows become bounds
    let fixed = |lo: &[f64], hi: &[f64], k: usize| lo[k] == hi[k];
    for _pass in 0..4 {
        let mut changed = false;
        for (ri, row) in model.rows.iter().enumerate() {
            if !active[ri] {
                continue;
            }
            let mut rhs = row.rhs;
            let mut free: Option<(usize, f64)> = None;
            let mut n_free = 0;
            for &(k, a) in &row.coeffs {
                if fixed(&lo, &hi, k) {
                    rhs -= a * lo[k];
                } else {
                    n_free += 1;
                    free = Some((k, a));
                }
            }
            let scale = 1.0 + row.rhs.abs() + row.coeffs.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
            match (n_free, free) {
                (0, _) => {
                    let bad = match row.sense {
                        Sense::Le => rhs < -FEAS_TOL * scale,
                        Sense::Eq => rhs.abs() > FEAS_TOL * scale,
                    };
                    if bad {
                        return Relaxation::Infeasible;
                    }
                    active[ri] = false;
                }
                (1, Some((k, a))) => {
                    let t = rhs / a;
                    match row.sense {
                        Sense::Eq => {
                            if t < lo[k] - FEAS_TOL * scale || t > hi[k] + FEAS_TOL * scale {
                                return Relaxation::Infeasible;
                            }
                            let t = t.max(lo[k]).min(hi[k]);
                            lo[k] = t;
                            hi[k] = t;
                        }
                        Sense::Le => {
                            if a > 0.0 {
                                hi[k] = hi[k].min(t);
                            } else {
                                lo[k] = lo[k].max(t);
                            }
                            if lo[k] > hi[k] {
                                if lo[k] - hi[k] > FEAS_TOL * scale {
                                    return Relaxation::Infeasible;
                                }
                                let mid = 0.5 * (lo[k] + hi[k]);
                                lo[k] = mid;
                                hi[k] = mid;
                            }
                        }
                    }
                    active[ri] = false;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let free: Vec<usize> = (0..nv).filter(|&k| !fixed(&lo, &hi, k)).collect();
    let mut col = vec![usize::MAX; nv];
    for (c, &k) in free.iter().enumerate() {
        col[k] = c;
    }
    let nf = free.len();
    let mut values: Vec<f64> = (0..nv).map(|k| if fixed(&lo, &hi, k) { lo[k] } else { 0.0 }).collect();
    let (mut ub_rows, mut eq_rows) = (Vec::new(), Vec::new());
    for (ri, row) in model.rows.iter().enumerate() {
        if active[ri] {
            match row.sense {
                Sense::Le => ub_rows.push(ri),
                Sense::Eq => eq_rows.push(ri),
            }
        }
    }
    let build = |rows: &[usize]| {
        let mut a = DMatrix::zeros(rows.len(), nf);
        let mut b = DVector::zeros(rows.len());
        for (r, &ri) in rows.iter().enumerate() {
            let row = &model.rows[ri];
            let mut rhs = row.rhs;
            for &(k, v) in &row.coeffs {
                if col[k] == usize::MAX {
                    rhs -= v * values[k];
                } else {
                    a[(r, col[k])] += v;
                }
            }
            b[r] = rhs;
        }
        (a, b)
    };
    let (a_ub, b_ub) = build(&ub_rows);
    let (a_eq, b_eq) = build(&eq_rows);
    let mut c = DVector::from_fn(nf, |c, _| model.objective[free[c]]);
    let quad = model.has_quadratic();
    let mut h = DMatrix::zeros(if quad { nf } else { 0 }, if quad { nf } else { 0 });
    if quad {
        for &(r, cc, q) in &model.quad {
            match (col[r] != usize::MAX, col[cc] != usize::MAX) {
                (true, true) => {
                    h[(col[r], col[cc])] += q;
                    if r != cc {
                        h[(col[cc], col[r])] += q;
                    }
                }
                (true, false) => c[col[r]] += q * values[cc],
                (false, true) => c[col[cc]] += q * values[r],
                (false, false) => {}
            }
        }
    }
    let lp = LPProblem::new(c)
        .with_ineq(a_ub, b_ub)
        .with_eq(a_eq, b_eq)
        .with_bounds(free.iter().map(|&k| lo[k]).collect(), free.iter().map(|&k| hi[k]).collect());
    let res = if quad { solve_qp(&QPProblem::new(h, lp)) } else { solve_lp(&lp) };
    match res.status {
        ConvexStatus::Optimal => {
            for (c, &k) in free.iter().enumerate() {
                values[k] = res.x[c];
            }
            let objective = model.objective_value(&values);
            Relaxation::Solved { values, objective }
        }
        ConvexStatus::Unbounded => Relaxation::Unbounded,
        _ => Relaxation::Infeasible,
    }
}

/// Pick a binary assignment consistent with the continuous part of `v`:
/// the rounded value when every row containing the binary allows it,
/// otherwise the other value.
fn snap(model: &MipModel, v: &[f64], binaries: &[usize], rows_of: &[Vec<usize>], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for &b in binaries {
        if lo[b] == hi[b] {
            out[b] = lo[b];
            continue;
        }
        let pref = if v[b] >= 0.5 { 1.0 } else { 0.0 };
        let ok = |val: f64, w: &mut Vec<f64>| {
            w[b] = val;
            rows_of[b].iter().all(|&ri| {
                let row = &model.rows[ri];
                row.violation(w) <= 1e-7 * (1.0 + row.rhs.abs())
            })
        };
        let mut w = out.clone();
        out[b] = if ok(pref, &mut w) || !ok(1.0 - pref, &mut w) { pref } else { 1.0 - pref };
    }
    out
}

/// Depth-first branch and bound; branches on the most fractional binary,
/// exploring the `1` child first.
pub fn branch_and_bound(model: &MipModel, cfg: &BnbConfig) -> BnbOutcome {
    let nv = model.n_vars();
    let binaries = model.binaries();
    let base_lo: Vec<f64> = model.vars.iter().map(|v| if v.binary { v.lower.max(0.0) } else { v.lower }).collect();
    let base_hi: Vec<f64> = model.vars.iter().map(|v| if v.binary { v.upper.min(1.0) } else { v.upper }).collect();
    let mut rows_of = vec![Vec::new(); nv];
    for (ri, row) in model.rows.iter().enumerate() {
        for &(k, _) in &row.coeffs {
            if model.vars[k].binary {
                rows_of[k].push(ri);
            }
        }
    }

    let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut tried: HashSet<Vec<bool>> = HashSet::new();
    let mut nodes = 0usize;
    let prune = |bound: f64, inc: &Option<(Vec<f64>, f64)>| match inc {
        Some((_, best)) => bound >= best - cfg.gap * best.abs().max(1.0),
        None => false,
    };
    let bounds_for = |fix: &[(usize, f64)]| {
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        for &(k, v) in fix {
            lo[k] = v;
            hi[k] = v;
        }
        (lo, hi)
    };
    // solve with all binaries fixed at `assign`
    let leaf = |assign: &[f64]| -> Option<(Vec<f64>, f64)> {
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        for &b in &binaries {
            lo[b] = assign[b].round();
            hi[b] = assign[b].round();
        }
        match relax(model, &lo, &hi) {
            Relaxation::Solved { values, objective } => Some((values, objective)),
            _ => None,
        }
    };

    for hint in &cfg.hints {
        if hint.len() != binaries.len() || !tried.insert(hint.clone()) {
            continue;
        }
        let mut cand = vec![0.0; nv];
        for (&b, &h) in binaries.iter().zip(hint) {
            cand[b] = if h { 1.0 } else { 0.0 };
        }
        if let Some((v, obj)) = leaf(&cand) {
            if !prune(obj, &incumbent) {
                incumbent = Some((v, obj));
            }
        }
    }

    while let Some(fix) = stack.pop() {
        if nodes >= cfg.node_limit {
            return match incumbent {
                Some((values, objective)) => BnbOutcome {
                    status: BnbStatus::NodeLimit,
                    values,
                    objective,
                    nodes,
                },
                None => BnbOutcome {
                    status: BnbStatus::NodeLimit,
                    values: Vec::new(),
                    objective: f64::INFINITY,
                    nodes,
                },
            };
        }
        nodes += 1;
        let (lo, hi) = bounds_for(&fix);
        let (values, objective) = match relax(model, &lo, &hi) {
            Relaxation::Solved { values, objective } => (values, objective),
            Relaxation::Infeasible => continue,
            Relaxation::Unbounded => {
                // unbounded relaxations are branched without a bound
                let v: Vec<f64> = (0..nv).map(|k| if lo[k].is_finite() { lo[k] } else { 0.0 }).collect();
                (v, f64::NEG_INFINITY)
            }
        };
        if prune(objective, &incumbent) {
            continue;
        }
        let frac = binaries
            .iter()
            .filter(|&&b| lo[b] != hi[b])
            .map(|&b| (b, (values[b] - values[b].round()).abs()))
            .filter(|&(_, f)| f > cfg.int_tol)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let branch = match frac {
            Some((b, _)) => b,
            None => {
                if let Some((v, obj)) = leaf(&values) {
                    if !prune(obj, &incumbent) {
                        incumbent = Some((v, obj));
                    }
                    continue;
                }
                // near-integral relaxation whose rounding is infeasible: with
                // large coefficients a tiny δ still carries weight, so keep
                // branching on the unfixed binaries
                let open = binaries
                    .iter()
                    .filter(|&&b| lo[b] != hi[b])
                    .map(|&b| (b, (values[b] - values[b].round()).abs()))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                match open {
                    Some((b, _)) => b,
                    None => continue,
                }
            }
        };
        if cfg.heuristic {
            let cand = snap(model, &values, &binaries, &rows_of, &lo, &hi);
            let key: Vec<bool> = binaries.iter().map(|&b| cand[b] > 0.5).collect();
            if tried.insert(key) {
                if let Some((v, obj)) = leaf(&cand) {
                    if !prune(obj, &incumbent) {
                        incumbent = Some((v, obj));
                    }
                }
            }
            if prune(objective, &incumbent) {
                continue;
            }
        }
        let mut zero = fix.clone();
        zero.push((branch, 0.0));
        let mut one = fix;
        one.push((branch, 1.0));
        stack.push(zero);
        stack.push(one);
    }
    match incumbent {
        Some((values, objective)) => BnbOutcome {
            status: BnbStatus::Optimal,
            values,
            objective,
            nodes,
        },
        None => BnbOutcome {
            status: BnbStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            nodes,
        },
    }
}
