//! Finite-horizon Riccati recursion and the LQR gain game.

use nalgebra::DMatrix;

use super::LinearSystem;
use crate::diff::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{min_sym_eigenvalue, spectral_radius};
use crate::nls::{solve_bounded, BoundedProblem, LMConfig, LMStatus};

/// Small row-major matrix over any [`Scalar`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Mat {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows() * m.ncols()).map(|k| T::from_f64(m[(k / m.ncols(), k % m.ncols())])).collect(),
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).re())
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, o: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                for c in 0..o.cols {
                    out.data[r * o.cols + c] += a * o.at(k, c);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }

    pub fn add(&self, o: &Mat<T>) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn sub(&self, o: &Mat<T>) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    fn symmetrize(&mut self) {
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                let v = (self.at(r, c) + self.at(c, r)) * 0.5;
                self.set(r, c, v);
                self.set(c, r, v);
            }
        }
    }

    /// Solve `self · X = rhs` by Gaussian elimination with partial pivoting
    /// on the real parts. `None` when a pivot vanishes.
    pub fn solve(&self, rhs: &Mat<T>) -> Option<Mat<T>> {
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.data.iter().map(|v| v.re().abs()).fold(0.0, f64::max).max(1e-300);
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a.at(x, col).re().abs().total_cmp(&a.at(y, col).re().abs()))?;
            if a.at(piv, col).re().abs() <= 1e-14 * scale {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    a.data.swap(piv * n + c, col * n + c);
                }
                for c in 0..b.cols {
                    b.data.swap(piv * b.cols + c, col * b.cols + c);
                }
            }
            let d = a.at(col, col);
            for r in col + 1..n {
                let f = a.at(r, col) / d;
                for c in col..n {
                    let v = a.at(r, c) - f * a.at(col, c);
                    a.set(r, c, v);
                }
                for c in 0..b.cols {
                    let v = b.at(r, c) - f * b.at(col, c);
                    b.set(r, c, v);
                }
            }
        }
        for col in (0..n).rev() {
            let d = a.at(col, col);
            for c in 0..b.cols {
                let mut v = b.at(col, c);
                for k in col + 1..n {
                    v -= a.at(col, k) * b.at(k, c);
                }
                b.set(col, c, v / d);
            }
        }
        Some(b)
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiResult<T> {
    /// First-stage gain `K_0`, with `u_0 = −K_0 x_0`.
    pub gain: Mat<T>,
    /// `P_N = Q, P_{N−1}, …, P_0` in the order computed.
    pub p: Vec<Mat<T>>,
}

/// Backward recursion for `Σ_{k=0}^{N} x_kᵀQx_k + u_kᵀRu_k` subject to
/// `x_{k+1} = A x_k + B u_k`.
pub fn riccati<T: Scalar>(a: &Mat<T>, b: &Mat<T>, q: &Mat<T>, r: &Mat<T>, horizon: usize) -> Result<RiccatiResult<T>> {
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    let mut seq = vec![p.clone()];
    let mut gain = Mat::zeros(b.cols, a.rows);
    for step in 0..horizon {
        let btp = bt.mul(&p);
        let s = r.add(&btp.mul(b));
        let btpa = btp.mul(a);
        gain = s.solve(&btpa).ok_or(Error::SingularRiccatiStep { stage: horizon - 1 - step })?;
        let mut next = q.add(&at.mul(&p).mul(a)).sub(&btpa.transpose().mul(&gain));
        next.symmetrize();
        p = next;
        seq.push(p.clone());
    }
    Ok(RiccatiResult { gain, p: seq })
}

/// `f64` front end of [`riccati`]: returns the first-stage gain and the
/// matrices `P_k`.
pub fn finite_horizon_lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    horizon: usize,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let out = riccati::<f64>(
        &Mat::from_dmatrix(a),
        &Mat::from_dmatrix(b),
        &Mat::from_dmatrix(q),
        &Mat::from_dmatrix(r),
        horizon,
    )?;
    Ok((out.gain.to_dmatrix(), out.p.iter().map(|m| m.to_dmatrix()).collect()))
}

#[derive(Debug, Clone)]
pub struct LQRGameSpec {
    pub system: LinearSystem,
    /// State weights `Q_i` (`n_x × n_x`, PSD).
    pub q: Vec<DMatrix<f64>>,
    /// Input weights `R_i` (`n_i × n_i`, PD).
    pub r: Vec<DMatrix<f64>>,
    pub horizon: usize,
}

impl LQRGameSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let sys = &self.system;
        if self.q.len() != sys.agents() || self.r.len() != sys.agents() {
            return Err(Error::Dimension("one Q_i and one R_i per agent required".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidGame("LQR horizon must be at least 1".into()));
        }
        for i in 0..sys.agents() {
            let ni = sys.inputs.dims()[i];
            if self.q[i].shape() != (sys.n_x(), sys.n_x()) || self.r[i].shape() != (ni, ni) {
                return Err(Error::Dimension(format!("weights of agent {} have the wrong shape", i + 1)));
            }
            if min_sym_eigenvalue(&self.q[i]) < -1e-9 {
                return Err(Error::InvalidGame(format!("Q of agent {} is not PSD", i + 1)));
            }
            if min_sym_eigenvalue(&self.r[i]) <= 0.0 {
                return Err(Error::InvalidGame(format!("R of agent {} is not positive definite", i + 1)));
            }
        }
        Ok(())
    }
}

/// Best response of agent `i`: the finite-horizon gain for
/// `(A − B_{−i}K_{−i}, B_i, Q_i, R_i)`. Rows of `k` owned by agent `i` are
/// ignored.
pub fn best_response<T: Scalar>(spec: &LQRGameSpec, i: usize, k: &Mat<T>) -> Result<Mat<T>> {
    let sys = &spec.system;
    let n = sys.n_x();
    let own = sys.inputs.range(i);
    let mut acl: Mat<T> = Mat::from_dmatrix(&sys.a);
    for u in 0..sys.n_u() {
        if own.contains(&u) {
            continue;
        }
        for r in 0..n {
            let bru = sys.b[(r, u)];
            if bru == 0.0 {
                continue;
            }
            for c in 0..n {
                let v = acl.at(r, c) - k.at(u, c) * bru;
                acl.set(r, c, v);
            }
        }
    }
    let bi = Mat::from_dmatrix(&sys.b_agent(i));
    Ok(riccati(&acl, &bi, &Mat::from_dmatrix(&spec.q[i]), &Mat::from_dmatrix(&spec.r[i]), spec.horizon)?.gain)
}

/// `K_i^{LQR}(K_{−i})` for the stacked gain `k` (`n_u × n_x`).
pub fn lqr_best_response_gain(spec: &LQRGameSpec, i: usize, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if k.shape() != (spec.system.n_u(), spec.system.n_x()) {
        return Err(Error::Dimension("stacked gain must be n_u × n_x".into()));
    }
    Ok(best_response(spec, i, &Mat::<f64>::from_dmatrix(k))?.to_dmatrix())
}

/// Gain of the cooperative problem `(A, B, Σ Q_i, blkdiag(R_i))`.
pub fn centralized_lqr(spec: &LQRGameSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let sys = &spec.system;
    let q = spec.q.iter().fold(DMatrix::zeros(sys.n_x(), sys.n_x()), |acc, q| acc + q);
    let mut r = DMatrix::zeros(sys.n_u(), sys.n_u());
    for i in 0..sys.agents() {
        let rg = sys.inputs.range(i);
        r.view_mut((rg.start, rg.start), (rg.len(), rg.len())).copy_from(&spec.r[i]);
    }
    Ok(finite_horizon_lqr(&sys.a, &sys.b, &q, &r, spec.horizon)?.0)
}

// residual K − BR(K), entries ordered row-major over the stacked gain
struct FixedPoint<'a> {
    spec: &'a LQRGameSpec,
}

impl FixedPoint<'_> {
    fn eval<T: Scalar>(&self, k: &Mat<T>) -> Result<Vec<T>> {
        let sys = &self.spec.system;
        let n = sys.n_x();
        let mut out = k.data.clone();
        for i in 0..sys.agents() {
            let br = best_response(self.spec, i, k)?;
            for (a, u) in sys.inputs.range(i).enumerate() {
                for c in 0..n {
                    out[u * n + c] -= br.at(a, c);
                }
            }
        }
        Ok(out)
    }

    fn to_mat(&self, w: &[f64]) -> Mat<f64> {
        Mat {
            rows: self.spec.system.n_u(),
            cols: self.spec.system.n_x(),
            data: w.to_vec(),
        }
    }
}

impl BoundedProblem for FixedPoint<'_> {
    fn dim(&self) -> usize {
        self.spec.system.n_u() * self.spec.system.n_x()
    }

    fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.eval(&self.to_mat(w))
    }

    fn jacobian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        let sys = &self.spec.system;
        let n = sys.n_x();
        let d = self.dim();
        let mut jac = DMatrix::identity(d, d);
        let base: Mat<Dual<f64>> = Mat {
            rows: sys.n_u(),
            cols: n,
            data: w.iter().map(|&v| Dual::constant(v)).collect(),
        };
        for col in 0..d {
            let owner = sys.inputs.owner(col / n);
            let mut k = base.clone();
            k.data[col].deriv = 1.0;
            for i in 0..sys.agents() {
                if i == owner {
                    continue;
                }
                let br = best_response(self.spec, i, &k)?;
                for (a, u) in sys.inputs.range(i).enumerate() {
                    for c in 0..n {
                        jac[(u * n + c, col)] -= br.at(a, c).deriv;
                    }
                }
            }
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone)]
pub struct LQRGameResult {
    /// Stacked equilibrium gain `K*` (`n_u × n_x`).
    pub k: DMatrix<f64>,
    pub status: LMStatus,
    pub iterations: usize,
    /// `max |K − BR(K)|` entrywise.
    pub residual_norm: f64,
    /// `‖K_i − K_i^{LQR}(K_{−i})‖_F` per agent.
    pub fixed_point_error: Vec<f64>,
    /// Spectral radius of `A − B K*`.
    pub spectral_radius: f64,
}

impl LQRGameResult {
    pub fn max_fixed_point_error(&self) -> f64 {
        self.fixed_point_error.iter().cloned().fold(0.0, f64::max)
    }
}

/// Nash equilibrium over feedback gains: solves `K_i = K_i^{LQR}(K_{−i})`
/// for all agents by Levenberg–Marquardt from `k0`.
pub fn solve_lqr_game(spec: &LQRGameSpec, k0: &DMatrix<f64>, cfg: &LMConfig) -> Result<LQRGameResult> {
    spec.validate()?;
    let sys = &spec.system;
    if k0.shape() != (sys.n_u(), sys.n_x()) {
        return Err(Error::Dimension("initial gain must be n_u × n_x".into()));
    }
    let prob = FixedPoint { spec };
    let w0: Vec<f64> = (0..sys.n_u()).flat_map(|r| (0..sys.n_x()).map(move |c| k0[(r, c)])).collect();
    let out = solve_bounded(&prob, &w0, cfg)?;
    let k = prob.to_mat(&out.w).to_dmatrix();
    let mut errs = Vec::with_capacity(sys.agents());
    for i in 0..sys.agents() {
        let br = best_response(spec, i, &prob.to_mat(&out.w))?.to_dmatrix();
        let rg = sys.inputs.range(i);
        errs.push((k.rows(rg.start, rg.len()) - br).norm());
    }
    let rho = spectral_radius(&(&sys.a - &sys.b * &k));
    Ok(LQRGameResult {
        k,
        status: out.status,
        iterations: out.iterations,
        residual_norm: out.residual_norm,
        fixed_point_error: errs,
        spectral_radius: rho,
    })
}
