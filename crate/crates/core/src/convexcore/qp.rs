//! Primal active-set method for convex QPs.
//!
//! A feasible start comes from the simplex with zero cost. The working set
//! holds equality rows, active inequality rows and fixed bounds; steps are
//! taken in the null space of the working rows restricted to free variables.
//! Zero-curvature directions of the reduced Hessian are handled with a
//! pseudo-inverse step, or a descent ray when the gradient has a component
//! along them.

use nalgebra::{DMatrix, DVector};

use super::{solve_lp, ConvexResult, ConvexStatus, LPProblem, QPProblem};
use crate::linalg::{lstsq, null_space};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
}

struct WorkingSet {
    rows: Vec<usize>,
    fixed: Vec<Option<Bound>>,
}

/// Incremental Gram–Schmidt independence test used to seed the working set.
struct Basis {
    q: Vec<DVector<f64>>,
}

impl Basis {
    fn try_add(&mut self, v: DVector<f64>) -> bool {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return false;
        }
        let mut r = v;
        for _ in 0..2 {
            for q in &self.q {
                let d = q.dot(&r);
                r.axpy(-d, q, 1.0);
            }
        }
        let nr = r.norm();
        if nr > 1e-9 * norm0 {
            self.q.push(r / nr);
            true
        } else {
            false
        }
    }
}

pub fn solve_qp(prob: &QPProblem) -> ConvexResult {
    let lp = &prob.constraints;
    let h = &prob.hessian;
    let n = lp.n();
    let m_ub = lp.a_ub.nrows();
    let m_eq = lp.a_eq.nrows();

    let phase1 = solve_lp(&LPProblem { c: DVector::zeros(n), ..lp.clone() });
    match phase1.status {
        ConvexStatus::Optimal => {}
        ConvexStatus::Unbounded => unreachable!("zero objective cannot be unbounded"),
        s => return ConvexResult::failed(s, n, m_ub, m_eq),
    }
    let mut x = phase1.x;
    let scale_b = 1.0 + lp.b_ub.amax().max(lp.b_eq.amax());
    let feas_tol = 1e-9 * scale_b;

    // seed: equalities, then fixed bounds, then active rows, keeping independence
    let mut basis = Basis { q: Vec::new() };
    for i in 0..m_eq {
        basis.try_add(lp.a_eq.row(i).transpose());
    }
    let mut ws = WorkingSet { rows: Vec::new(), fixed: vec![None; n] };
    for j in 0..n {
        let side = if lp.lower[j].is_finite() && (x[j] - lp.lower[j]).abs() <= feas_tol {
            Some(Bound::Lower)
        } else if lp.upper[j].is_finite() && (lp.upper[j] - x[j]).abs() <= feas_tol {
            Some(Bound::Upper)
        } else {
            None
        };
        if let Some(side) = side {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            if basis.try_add(e) {
                ws.fixed[j] = Some(side);
                x[j] = if side == Bound::Lower { lp.lower[j] } else { lp.upper[j] };
            }
        }
    }
    if m_ub > 0 {
        let s = &lp.a_ub * &x - &lp.b_ub;
        for i in 0..m_ub {
            if s[i] >= -feas_tol && basis.try_add(lp.a_ub.row(i).transpose()) {
                ws.rows.push(i);
            }
        }
    }

    let mut singular = false;
    let max_iter = 20 * (n + m_ub + m_eq) + 200;
    let mut zero_steps = 0usize;
    for iter in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&j| ws.fixed[j].is_none()).collect();
        let g = h * &x + &lp.c;
        let gscale = 1.0 + g.amax();

        // working rows restricted to free columns
        let n_rows = m_eq + ws.rows.len();
        let aw = DMatrix::from_fn(n_rows, free.len(), |r, k| {
            if r < m_eq {
                lp.a_eq[(r, free[k])]
            } else {
                lp.a_ub[(ws.rows[r - m_eq], free[k])]
            }
        });
        let z = null_space(&aw, free.len(), 1e-10);
        let gv = DVector::from_fn(free.len(), |k, _| g[free[k]]);
        let mut d = DVector::zeros(n);
        let mut ray = false;
        if z.ncols() > 0 {
            let hv = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rh = z.transpose() * &hv * &z;
            let rg = z.transpose() * &gv;
            let eig = ((&rh + rh.transpose()) * 0.5).symmetric_eigen();
            let emax = eig.eigenvalues.amax().max(1.0);
            let mut pz = DVector::zeros(z.ncols());
            let mut gnull = DVector::zeros(z.ncols());
            for k in 0..z.ncols() {
                let v = eig.eigenvectors.column(k);
                let coef = v.dot(&rg);
                if eig.eigenvalues[k] > 1e-10 * emax {
                    pz -= v * (coef / eig.eigenvalues[k]);
                } else {
                    singular = true;
                    gnull += v * coef;
                }
            }
            let step = if gnull.norm() > 1e-10 * gscale {
                ray = true;
                z * -gnull
            } else {
                z * pz
            };
            for (k, &j) in free.iter().enumerate() {
                d[j] = step[k];
            }
        }

        let xscale = 1.0 + x.amax();
        if !ray && d.amax() <= 1e-12 * xscale {
            // stationary on the working set: check multiplier signs
            let rhs = -gv;
            let y = lstsq(&aw.transpose(), &rhs);
            let mut lambda = DVector::zeros(m_ub);
            let mut mu = DVector::zeros(m_eq);
            for r in 0..m_eq {
                mu[r] = y[r];
            }
            for (k, &i) in ws.rows.iter().enumerate() {
                lambda[i] = y[m_eq + k];
            }
            let mut r_full = g.clone();
            if m_eq > 0 {
                r_full += lp.a_eq.tr_mul(&mu);
            }
            if m_ub > 0 {
                r_full += lp.a_ub.tr_mul(&lambda);
            }
            // candidates to drop: (index in working set encoding, multiplier)
            let tol = 1e-10 * gscale;
            let mut worst: Option<(isize, f64)> = None;
            let bland = zero_steps > 10;
            let mut consider = |key: isize, val: f64| {
                if val < -tol {
                    let take = match worst {
                        None => true,
                        Some((_, w)) => !bland && val < w,
                    };
                    if take {
                        worst = Some((key, val));
                    }
                }
            };
            for (k, &i) in ws.rows.iter().enumerate() {
                consider(k as isize, lambda[i]);
            }
            for j in 0..n {
                match ws.fixed[j] {
                    Some(Bound::Lower) => consider(-(j as isize) - 1, r_full[j]),
                    Some(Bound::Upper) => consider(-(j as isize) - 1, -r_full[j]),
                    None => {}
                }
            }
            match worst {
                None => {
                    for v in lambda.iter_mut() {
                        *v = v.max(0.0);
                    }
                    let mut res = ConvexResult::from_primal_dual(
                        lp,
                        Some(h),
                        x,
                        lambda,
                        mu,
                        ConvexStatus::Optimal,
                    );
                    res.singular_hessian = singular;
                    res.iterations = iter;
                    return res;
                }
                Some((key, _)) if key >= 0 => {
                    ws.rows.remove(key as usize);
                }
                Some((key, _)) => {
                    ws.fixed[(-key - 1) as usize] = None;
                }
            }
            continue;
        }

        // ratio test along d
        let mut alpha = if ray { f64::INFINITY } else { 1.0 };
        let mut block: Option<(isize, Option<Bound>)> = None;
        if m_ub > 0 {
            let ad = &lp.a_ub * &d;
            let ax = &lp.a_ub * &x;
            for i in 0..m_ub {
                if ws.rows.contains(&i) {
                    continue;
                }
                let rate = ad[i];
                if rate > 1e-12 * (1.0 + d.amax()) {
                    let t = ((lp.b_ub[i] - ax[i]).max(0.0)) / rate;
                    if t < alpha {
                        alpha = t;
                        block = Some((i as isize, None));
                    }
                }
            }
        }
        for &j in &free {
            if d[j] < 0.0 && lp.lower[j].is_finite() {
                let t = ((x[j] - lp.lower[j]).max(0.0)) / -d[j];
                if t < alpha {
                    alpha = t;
                    block = Some((-(j as isize) - 1, Some(Bound::Lower)));
                }
            } else if d[j] > 0.0 && lp.upper[j].is_finite() {
                let t = ((lp.upper[j] - x[j]).max(0.0)) / d[j];
                if t < alpha {
                    alpha = t;
                    block = Some((-(j as isize) - 1, Some(Bound::Upper)));
                }
            }
        }
        if alpha.is_infinite() {
            let mut res = ConvexResult::failed(ConvexStatus::Unbounded, n, m_ub, m_eq);
            res.singular_hessian = true;
            return res;
        }
        if alpha * d.amax() <= 1e-14 * xscale {
            zero_steps += 1;
        } else {
            zero_steps = 0;
        }
        x.axpy(alpha, &d, 1.0);
        match block {
            Some((key, None)) => ws.rows.push(key as usize),
            Some((key, Some(side))) => {
                let j = (-key - 1) as usize;
                x[j] = if side == Bound::Lower { lp.lower[j] } else { lp.upper[j] };
                ws.fixed[j] = Some(side);
            }
            None => {}
        }
    }
    let mut res = ConvexResult::failed(ConvexStatus::IterationLimit, n, m_ub, m_eq);
    res.singular_hessian = singular;
    res
}
