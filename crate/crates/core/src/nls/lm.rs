//! Projected Levenberg–Marquardt for bound-constrained least squares with an
//! optional smooth extra cost:
//!
//! `min_w  J(w) + ½ ‖r(w)‖²   s.t.  lo ≤ w ≤ hi`.
//!
//! Each iteration solves `(H + μ I) Δ = −∇` on the free variables with
//! `H = JᵣᵀJᵣ + ∇²J`, projects the trial point onto the box and accepts it
//! only if the merit strictly decreases.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::inf_norm;

/// Smooth additive cost evaluated at a point.
#[derive(Debug, Clone)]
pub struct ExtraCost {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Problem solved by [`solve_bounded`].
pub trait BoundedProblem {
    fn dim(&self) -> usize;
    fn lower(&self) -> Vec<f64> {
        vec![f64::NEG_INFINITY; self.dim()]
    }
    fn upper(&self) -> Vec<f64> {
        vec![f64::INFINITY; self.dim()]
    }
    fn residual(&self, w: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, w: &[f64]) -> Result<DMatrix<f64>>;
    fn extra_cost(&self, _w: &[f64]) -> Result<Option<ExtraCost>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LMConfig {
    pub max_iter: usize,
    /// Convergence threshold on `‖r‖∞` (pure least squares only).
    pub residual_tol: f64,
    /// Relative step threshold `‖Δ‖ ≤ step_tol (1 + ‖w‖)`.
    pub step_tol: f64,
    /// Threshold on the projected gradient, relative to `1 + merit`.
    pub grad_tol: f64,
    pub damping0: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Penalty weight on `‖R‖²` in design problems.
    pub rho: f64,
    /// Consecutive rejected trial steps before reporting divergence.
    pub max_rejections: usize,
    /// Run the best-response certificate on converged equilibria.
    pub certify: bool,
}

impl Default for LMConfig {
    fn default() -> Self {
        LMConfig {
            max_iter: 200,
            residual_tol: 1e-8,
            step_tol: 1e-10,
            grad_tol: 1e-14,
            damping0: 1e-3,
            damping_up: 10.0,
            damping_down: 3.0,
            rho: 1e4,
            max_rejections: 20,
            certify: true,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.residual_tol > 0.0
            && self.step_tol > 0.0
            && self.grad_tol > 0.0
            && self.damping0 > 0.0
            && self.damping_up > 1.0
            && self.damping_down > 1.0
            && self.rho > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Solver("invalid Levenberg-Marquardt configuration".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LMStatus {
    Converged,
    SmallStep,
    MaxIter,
    Diverged,
}

impl LMStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LMStatus::Converged => "converged",
            LMStatus::SmallStep => "small_step",
            LMStatus::MaxIter => "max_iter",
            LMStatus::Diverged => "diverged",
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub merit: f64,
    pub damping: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone)]
pub struct LMOutcome {
    pub w: Vec<f64>,
    pub residual: Vec<f64>,
    /// `‖r‖∞` at the returned point.
    pub residual_norm: f64,
    pub merit: f64,
    pub iterations: usize,
    pub status: LMStatus,
    pub trace: Vec<TraceRow>,
}

/// Write an iteration trace as CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,merit,damping,step_norm")?;
    for t in trace {
        writeln!(out, "{},{:e},{:e},{:e}", t.iter, t.merit, t.damping, t.step_norm)?;
    }
    Ok(())
}

fn project(w: &mut [f64], lo: &[f64], hi: &[f64]) {
    for k in 0..w.len() {
        w[k] = w[k].max(lo[k]).min(hi[k]);
    }
}

struct Eval {
    r: Vec<f64>,
    merit: f64,
}

fn evaluate<P: BoundedProblem + ?Sized>(prob: &P, w: &[f64], with_extra: bool) -> Result<Eval> {
    let r = prob.residual(w)?;
    let extra = if with_extra {
        prob.extra_cost(w)?.map(|e| e.value).unwrap_or(0.0)
    } else {
        0.0
    };
    let merit = extra + 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    Ok(Eval { r, merit })
}

/// Minimize `J(w) + ½‖r(w)‖²` over the box of `prob` starting from `w0`.
pub fn solve_bounded<P: BoundedProblem + ?Sized>(prob: &P, w0: &[f64], cfg: &LMConfig) -> Result<LMOutcome> {
    cfg.validate()?;
    let dim = prob.dim();
    if w0.len() != dim {
        return Err(Error::Dimension(format!("start point has length {}, problem needs {dim}", w0.len())));
    }
    let lo = prob.lower();
    let hi = prob.upper();
    let mut w = w0.to_vec();
    project(&mut w, &lo, &hi);
    let has_extra = prob.extra_cost(&w)?.is_some();
    let mut cur = evaluate(prob, &w, has_extra)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        merit: cur.merit,
        damping: 0.0,
        step_norm: 0.0,
    }];
    let mut mu: Option<f64> = None;
    let mut rejections = 0usize;
    let mut status = LMStatus::MaxIter;
    let mut iterations = 0;

    'outer: while iterations < cfg.max_iter {
        if !has_extra && inf_norm(&cur.r) <= cfg.residual_tol {
            status = LMStatus::Converged;
            break;
        }
        let jac = prob.jacobian(&w)?;
        let rv = DVector::from_column_slice(&cur.r);
        let mut grad = jac.tr_mul(&rv);
        let mut hess = jac.tr_mul(&jac);
        if has_extra {
            if let Some(e) = prob.extra_cost(&w)? {
                grad += e.grad;
                hess += e.hess;
            }
        }
        if grad.iter().any(|v| !v.is_finite()) || hess.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDerivative { index: 0 });
        }
        // free set: drop variables sitting on a bound with an outward gradient
        let free: Vec<usize> = (0..dim)
            .filter(|&k| !((w[k] <= lo[k] && grad[k] > 0.0) || (w[k] >= hi[k] && grad[k] < 0.0)))
            .collect();
        let pg = free.iter().map(|&k| grad[k].abs()).fold(0.0, f64::max);
        if pg <= cfg.grad_tol * (1.0 + cur.merit.abs()) {
            status = LMStatus::SmallStep;
            break;
        }
        let hf = hess.select_rows(&free).select_columns(&free);
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&k| grad[k]));
        let scale = hf.diagonal().iter().cloned().fold(0.0_f64, f64::max).max(1e-12);
        let mut damping = mu.unwrap_or(cfg.damping0 * scale);
        loop {
            let mut a = hf.clone();
            for k in 0..free.len() {
                a[(k, k)] += damping;
            }
            let Some(chol) = a.cholesky() else {
                damping *= cfg.damping_up;
                if !damping.is_finite() || damping > 1e300 {
                    status = LMStatus::Diverged;
                    break 'outer;
                }
                continue;
            };
            let step = chol.solve(&(-&gf));
            let mut trial = w.clone();
            for (c, &k) in free.iter().enumerate() {
                trial[k] += step[c];
            }
            project(&mut trial, &lo, &hi);
            let step_norm = trial.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let wnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if step_norm <= cfg.step_tol * (1.0 + wnorm) {
                status = LMStatus::SmallStep;
                break 'outer;
            }
            let next = match evaluate(prob, &trial, has_extra) {
                Ok(e) if e.merit.is_finite() => Some(e),
                Ok(_) | Err(Error::NonFiniteResidual { .. }) | Err(Error::NonFiniteDerivative { .. }) => None,
                Err(e) => return Err(e),
            };
            match next {
                Some(e) if e.merit < cur.merit => {
                    w = trial;
                    cur = e;
                    iterations += 1;
                    rejections = 0;
                    mu = Some((damping / cfg.damping_down).max(1e-300));
                    trace.push(TraceRow {
                        iter: iterations,
                        merit: cur.merit,
                        damping,
                        step_norm,
                    });
                    break;
                }
                _ => {
                    rejections += 1;
                    damping *= cfg.damping_up;
                    if rejections >= cfg.max_rejections {
                        status = LMStatus::Diverged;
                        break 'outer;
                    }
                }
            }
        }
    }
    if status == LMStatus::MaxIter && !has_extra && inf_norm(&cur.r) <= cfg.residual_tol {
        status = LMStatus::Converged;
    }
    Ok(LMOutcome {
        residual_norm: inf_norm(&cur.r),
        residual: cur.r,
        merit: cur.merit,
        w,
        iterations,
        status,
        trace,
    })
}
