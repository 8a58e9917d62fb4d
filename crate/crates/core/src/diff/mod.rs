//! Derivatives of user-supplied functions.
//!
//! Game callbacks take `(x, p)` as slices of [`Ad`] and are differentiated
//! by seeding one input direction per forward pass. Central finite
//! differences are provided as an independent cross-check.

mod dual;

pub use dual::{Ad, Dual, Scalar};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Scalar callback `f(x, p)`.
pub type ScalarFn = dyn Fn(&[Ad], &[Ad]) -> Ad + Send + Sync;
/// Vector callback `F(x, p)`.
pub type VectorFn = dyn Fn(&[Ad], &[Ad]) -> Vec<Ad> + Send + Sync;

/// Dense Jacobian, one row per output and one column per input.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix(pub DMatrix<f64>);

impl JacobianMatrix {
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }
    pub fn cols(&self) -> usize {
        self.0.ncols()
    }
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }
    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn lift(v: &[f64]) -> Vec<Ad> {
    v.iter().map(|&a| Ad::cst(a)).collect()
}

fn seeded_inputs(x: &[f64], p: &[f64], inner: Option<usize>, outer: Option<usize>) -> (Vec<Ad>, Vec<Ad>) {
    let n = x.len();
    let mut xs = lift(x);
    let mut ps = lift(p);
    let mut seed = |k: usize, inner: bool| {
        let slot = if k < n { &mut xs[k] } else { &mut ps[k - n] };
        if inner {
            slot.value.deriv = 1.0;
        } else {
            slot.deriv.value = 1.0;
        }
    };
    if let Some(k) = inner {
        seed(k, true);
    }
    if let Some(k) = outer {
        seed(k, false);
    }
    (xs, ps)
}

/// Gradient of `f` with respect to `x`, one forward pass per component.
pub fn grad(f: &ScalarFn, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    (0..x.len())
        .map(|k| {
            let (xs, ps) = seeded_inputs(x, p, Some(k), None);
            let d = f(&xs, &ps).d_inner();
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFiniteDerivative { index: k })
            }
        })
        .collect()
}

/// Jacobian of `F` with respect to `x`.
pub fn jacobian(f: &VectorFn, x: &[f64], p: &[f64]) -> Result<JacobianMatrix> {
    jacobian_columns(f, x, p, x.len())
}

/// Jacobian of `F` with respect to the stacked input `(x, p)`.
pub fn jacobian_xp(f: &VectorFn, x: &[f64], p: &[f64]) -> Result<JacobianMatrix> {
    jacobian_columns(f, x, p, x.len() + p.len())
}

fn jacobian_columns(f: &VectorFn, x: &[f64], p: &[f64], ncols: usize) -> Result<JacobianMatrix> {
    let m = f(&lift(x), &lift(p)).len();
    let mut jac = DMatrix::zeros(m, ncols);
    for k in 0..ncols {
        let (xs, ps) = seeded_inputs(x, p, Some(k), None);
        let out = f(&xs, &ps);
        if out.len() != m {
            return Err(Error::Dimension(format!(
                "vector function changed output length from {m} to {}",
                out.len()
            )));
        }
        for (r, v) in out.iter().enumerate() {
            let d = v.d_inner();
            if !d.is_finite() {
                return Err(Error::NonFiniteDerivative { index: k });
            }
            jac[(r, k)] = d;
        }
    }
    Ok(JacobianMatrix(jac))
}

/// Value, gradient and Hessian of `f` over the stacked input `(x, p)`.
pub fn hessian_xp(f: &ScalarFn, x: &[f64], p: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let dim = x.len() + p.len();
    let mut g = DVector::zeros(dim);
    let mut h = DMatrix::zeros(dim, dim);
    let mut value = f(&lift(x), &lift(p)).val();
    if dim == 0 {
        return Ok((value, g, h));
    }
    for i in 0..dim {
        for j in 0..=i {
            let (xs, ps) = seeded_inputs(x, p, Some(i), Some(j));
            let r = f(&xs, &ps);
            if !(r.d_inner().is_finite() && r.d_mixed().is_finite()) {
                return Err(Error::NonFiniteDerivative { index: i });
            }
            value = r.val();
            h[(i, j)] = r.d_mixed();
            h[(j, i)] = r.d_mixed();
            if j == 0 {
                g[i] = r.d_inner();
            }
        }
    }
    Ok((value, g, h))
}

/// Outcome of comparing an analytic Jacobian against central differences.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub max_discrepancy: f64,
    /// `(row, col)` of the largest discrepancy.
    pub worst: Option<(usize, usize)>,
    /// Input columns where one-sided differences disagree (kinks).
    pub nonsmooth: Vec<usize>,
    pub tol: f64,
    pub pass: bool,
    pub note: Option<String>,
}

/// Step used by the central-difference oracle for input `v`.
pub fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Compare a given Jacobian of `f` at `x` against central differences.
pub fn fd_check_fn<F>(f: F, jac: &DMatrix<f64>, x: &[f64], tol: f64) -> CheckReport
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut worst = None;
    let mut max_discrepancy = 0.0_f64;
    let mut nonsmooth = Vec::new();
    let f0 = f(x);
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = fd_step(x[k]);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        let mut kink = false;
        for r in 0..f0.len() {
            let central = (fp[r] - fm[r]) / (2.0 * h);
            let fwd = (fp[r] - f0[r]) / h;
            let bwd = (f0[r] - fm[r]) / h;
            if (fwd - bwd).abs() > 1e-2 * central.abs().max(1.0) {
                kink = true;
            }
            let d = (central - jac[(r, k)]).abs();
            if !(d <= max_discrepancy) {
                max_discrepancy = d;
                worst = Some((r, k));
            }
        }
        if kink {
            nonsmooth.push(k);
        }
    }
    CheckReport {
        max_discrepancy,
        worst,
        nonsmooth,
        tol,
        pass: max_discrepancy <= tol,
        note: None,
    }
}

/// Compare the forward-mode Jacobian of `F` (with respect to `x`) against
/// central differences with step `1e-6·max(1, |x_k|)`.
pub fn fd_check(f: &VectorFn, x: &[f64], p: &[f64], tol: f64) -> CheckReport {
    let eval = |xv: &[f64]| -> Vec<f64> { f(&lift(xv), &lift(p)).iter().map(|v| v.val()).collect() };
    match jacobian(f, x, p) {
        Ok(jac) => fd_check_fn(eval, jac.entries(), x, tol),
        Err(e) => CheckReport {
            max_discrepancy: f64::INFINITY,
            worst: None,
            nonsmooth: Vec::new(),
            tol,
            pass: false,
            note: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(f: impl Fn(&[Ad], &[Ad]) -> Ad + Send + Sync + 'static) -> Box<ScalarFn> {
        Box::new(f)
    }

    fn vector(f: impl Fn(&[Ad], &[Ad]) -> Vec<Ad> + Send + Sync + 'static) -> Box<VectorFn> {
        Box::new(f)
    }

    #[test]
    fn grad_of_half_squared_norm_is_identity() {
        let f = scalar(|x, _| (x[0] * x[0] + x[1] * x[1]) * 0.5);
        assert_eq!(grad(&*f, &[1.0, 2.0], &[]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn grad_of_linear_function() {
        let f = scalar(|x, _| x[0] * 3.0 - x[1]);
        assert_eq!(grad(&*f, &[7.0, -4.0], &[]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn grad_matches_hand_derivative() {
        // f = x1 x2 + x2^2 at (2,3): (x2, x1 + 2 x2) = (3, 8)
        let f = scalar(|x, _| x[0] * x[1] + x[1] * x[1]);
        let g = grad(&*f, &[2.0, 3.0], &[]).unwrap();
        assert_eq!(g, vec![3.0, 8.0]);
        let fv = vector(|x, _| vec![x[0] * x[1] + x[1] * x[1]]);
        let rep = fd_check(&*fv, &[2.0, 3.0], &[], 1e-6);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = [[1.0, -2.0, 0.5], [0.0, 3.0, 4.0]];
        let f = vector(move |x, _| {
            a.iter()
                .map(|row| row.iter().zip(x).map(|(c, v)| *v * *c).sum())
                .collect()
        });
        let j = jacobian(&*f, &[0.3, 0.2, 0.1], &[]).unwrap();
        assert_eq!(j.entries(), &DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 4.0]));
    }

    #[test]
    fn jacobian_of_quadratic_map() {
        let f = vector(|x, _| vec![x[0] * x[0], x[0] * x[1]]);
        let j = jacobian(&*f, &[1.0, 2.0], &[]).unwrap();
        assert_eq!(j.entries(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 1.0]));
    }

    #[test]
    fn jacobian_of_constant_is_zero() {
        let f = vector(|_, _| vec![Ad::cst(4.0), Ad::cst(-1.0)]);
        let j = jacobian(&*f, &[1.0, 2.0, 3.0], &[]).unwrap();
        assert_eq!(j.entries(), &DMatrix::zeros(2, 3));
    }

    #[test]
    fn jacobian_with_parameters() {
        let f = vector(|x, p| vec![x[0] * p[0]]);
        let j = jacobian_xp(&*f, &[2.0], &[5.0]).unwrap();
        assert_eq!(j.entries(), &DMatrix::from_row_slice(1, 2, &[5.0, 2.0]));
    }

    #[test]
    fn hessian_of_cubic() {
        // f = x^2 y + y^3
        let f = scalar(|x, p| x[0] * x[0] * p[0] + p[0].powi(3));
        let (v, g, h) = hessian_xp(&*f, &[2.0], &[3.0]).unwrap();
        assert_eq!(v, 12.0 + 27.0);
        assert_eq!(g.as_slice(), &[12.0, 4.0 + 27.0]);
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[6.0, 4.0, 4.0, 18.0]));
    }

    #[test]
    fn fd_check_exp_at_zero() {
        let f = vector(|x, _| vec![x[0].exp()]);
        let rep = fd_check(&*f, &[0.0], &[], 1e-6);
        assert!(rep.pass);
        assert!(rep.max_discrepancy < 1e-9);
    }

    #[test]
    fn fd_check_flags_abs_kink() {
        let f = vector(|x, _| vec![x[0].abs()]);
        let rep = fd_check(&*f, &[0.0], &[], 1e-6);
        // AD picks the zero subgradient, central differences agree
        assert_eq!(rep.max_discrepancy, 0.0);
        assert_eq!(rep.nonsmooth, vec![0]);
    }

    #[test]
    fn sqrt_at_zero_is_a_derivative_error() {
        let f = scalar(|x, _| x[0].sqrt());
        assert_eq!(grad(&*f, &[0.0], &[]), Err(Error::NonFiniteDerivative { index: 0 }));
    }
}
