//! Dense LP (two-phase simplex) and convex QP (primal active set).
//!
//! Sign convention for multipliers: at an optimum
//! `H x + c + A_ubᵀλ + A_eqᵀμ − ν_l + ν_u = 0` with `λ, ν_l, ν_u ≥ 0`.

mod lp;
mod qp;

pub use lp::solve_lp;
pub use qp::solve_qp;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LPProblem {
    pub c: DVector<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LPProblem {
    /// Unconstrained problem with free variables.
    pub fn new(c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_ub: DMatrix::zeros(0, n),
            b_ub: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_ineq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ub = a;
        self.b_ub = b;
        self
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let ok = self.a_ub.ncols() == n
            && self.a_ub.nrows() == self.b_ub.len()
            && self.a_eq.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len()
            && self.lower.len() == n
            && self.upper.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "LP with {n} variables: A_ub {}x{}, b_ub {}, A_eq {}x{}, b_eq {}, bounds {}/{}",
                self.a_ub.nrows(),
                self.a_ub.ncols(),
                self.b_ub.len(),
                self.a_eq.nrows(),
                self.a_eq.ncols(),
                self.b_eq.len(),
                self.lower.len(),
                self.upper.len()
            )))
        }
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_ub.nrows() > 0 {
            v = v.max((&self.a_ub * x - &self.b_ub).max().max(0.0));
        }
        if self.a_eq.nrows() > 0 {
            v = v.max((&self.a_eq * x - &self.b_eq).amax());
        }
        for j in 0..self.n() {
            v = v.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        v
    }
}

/// `min ½ xᵀHx + cᵀx` over the feasible set of `constraints`; the linear
/// term is `constraints.c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QPProblem {
    pub hessian: DMatrix<f64>,
    pub constraints: LPProblem,
}

impl QPProblem {
    pub fn new(hessian: DMatrix<f64>, constraints: LPProblem) -> Self {
        Self { hessian, constraints }
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        let n = self.constraints.n();
        if self.hessian.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "Hessian is {}x{}, expected {n}x{n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        let asym = crate::linalg::asymmetry(&self.hessian);
        if asym > 1e-9 * (1.0 + self.hessian.amax()) {
            return Err(Error::Dimension(format!("Hessian asymmetric by {asym:.3e}")));
        }
        if n > 0 && crate::linalg::min_sym_eigenvalue(&self.hessian) < -1e-9 {
            return Err(Error::Dimension("Hessian not PSD".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.constraints.c.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl ConvexStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
            Self::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexResult {
    pub status: ConvexStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
    pub nu_lower: DVector<f64>,
    pub nu_upper: DVector<f64>,
    /// Inequality rows active at `x` (within 1e-8).
    pub active: Vec<usize>,
    /// A zero-curvature direction of the Hessian was met inside the working set.
    pub singular_hessian: bool,
    pub iterations: usize,
}

/// Multipliers of an optimal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Duals {
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
    pub nu_lower: DVector<f64>,
    pub nu_upper: DVector<f64>,
}

impl ConvexResult {
    pub(crate) fn failed(status: ConvexStatus, n: usize, m_ub: usize, m_eq: usize) -> Self {
        Self {
            status,
            x: DVector::from_element(n, f64::NAN),
            objective: match status {
                ConvexStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            lambda: DVector::zeros(m_ub),
            mu: DVector::zeros(m_eq),
            nu_lower: DVector::zeros(n),
            nu_upper: DVector::zeros(n),
            active: Vec::new(),
            singular_hessian: false,
            iterations: 0,
        }
    }

    /// Fill in bound multipliers, objective and active rows from `x, λ, μ`.
    pub(crate) fn from_primal_dual(
        prob: &LPProblem,
        hessian: Option<&DMatrix<f64>>,
        x: DVector<f64>,
        lambda: DVector<f64>,
        mu: DVector<f64>,
        status: ConvexStatus,
    ) -> Self {
        let n = prob.n();
        let mut r = prob.c.clone();
        if let Some(h) = hessian {
            r += h * &x;
        }
        if prob.a_ub.nrows() > 0 {
            r += prob.a_ub.tr_mul(&lambda);
        }
        if prob.a_eq.nrows() > 0 {
            r += prob.a_eq.tr_mul(&mu);
        }
        let mut nu_lower = DVector::zeros(n);
        let mut nu_upper = DVector::zeros(n);
        for j in 0..n {
            if r[j] > 0.0 && prob.lower[j].is_finite() {
                nu_lower[j] = r[j];
            } else if r[j] < 0.0 && prob.upper[j].is_finite() {
                nu_upper[j] = -r[j];
            }
        }
        let mut objective = prob.c.dot(&x);
        if let Some(h) = hessian {
            objective += 0.5 * x.dot(&(h * &x));
        }
        let active = if prob.a_ub.nrows() > 0 {
            let s = &prob.a_ub * &x - &prob.b_ub;
            (0..s.len()).filter(|&i| s[i] >= -1e-8 * (1.0 + prob.b_ub[i].abs())).collect()
        } else {
            Vec::new()
        };
        Self {
            status,
            x,
            objective,
            lambda,
            mu,
            nu_lower,
            nu_upper,
            active,
            singular_hessian: false,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == ConvexStatus::Optimal
    }

    pub fn duals(&self) -> Result<Duals> {
        if !self.is_optimal() {
            return Err(Error::NotOptimal);
        }
        Ok(Duals {
            lambda: self.lambda.clone(),
            mu: self.mu.clone(),
            nu_lower: self.nu_lower.clone(),
            nu_upper: self.nu_upper.clone(),
        })
    }

    /// Worst of primal infeasibility, stationarity, dual sign and
    /// complementarity, each scaled by `1 + ` the relevant data magnitude.
    pub fn kkt_error(&self, prob: &LPProblem, hessian: Option<&DMatrix<f64>>) -> f64 {
        let n = prob.n();
        let mut err = prob.infeasibility(&self.x);
        let mut r = prob.c.clone() - &self.nu_lower + &self.nu_upper;
        if let Some(h) = hessian {
            r += h * &self.x;
        }
        if prob.a_ub.nrows() > 0 {
            r += prob.a_ub.tr_mul(&self.lambda);
            let s = &prob.a_ub * &self.x - &prob.b_ub;
            for i in 0..s.len() {
                err = err.max(-self.lambda[i]).max((self.lambda[i] * s[i]).abs());
            }
        }
        if prob.a_eq.nrows() > 0 {
            r += prob.a_eq.tr_mul(&self.mu);
        }
        err = err.max(r.amax() / (1.0 + prob.c.amax()));
        for j in 0..n {
            err = err.max(-self.nu_lower[j]).max(-self.nu_upper[j]);
            if self.nu_lower[j] > 0.0 {
                err = err.max((self.nu_lower[j] * (self.x[j] - prob.lower[j])).abs());
            }
            if self.nu_upper[j] > 0.0 {
                err = err.max((self.nu_upper[j] * (prob.upper[j] - self.x[j])).abs());
            }
        }
        err
    }

    /// Dual objective of an LP under the sign convention above.
    pub fn lp_dual_objective(&self, prob: &LPProblem) -> f64 {
        let mut d = -prob.b_ub.dot(&self.lambda) - prob.b_eq.dot(&self.mu);
        for j in 0..prob.n() {
            if self.nu_lower[j] > 0.0 {
                d += prob.lower[j] * self.nu_lower[j];
            }
            if self.nu_upper[j] > 0.0 {
                d -= prob.upper[j] * self.nu_upper[j];
            }
        }
        d
    }
}

/// Free-function form of [`ConvexResult::duals`].
pub fn duals(result: &ConvexResult) -> Result<Duals> {
    result.duals()
}
