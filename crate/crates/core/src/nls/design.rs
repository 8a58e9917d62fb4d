//! Game design: `min_{z, p∈P} J(x, p) + α2‖x‖² + ρ/2 ‖R(z, p)‖²`, followed
//! by a hot-start equilibrium solve at the parameter found.

use nalgebra::{DMatrix, DVector};

use super::certificate::{best_response_certificate, CERT_TOL};
use super::gne::{check_start, solve_gne_nls, NLSResult};
use super::lm::{solve_bounded, BoundedProblem, ExtraCost, LMConfig};
use crate::error::{Error, Result};
use crate::kkt::{residual, residual_jacobian, KKTLayout, KKTVector, Wrt};
use crate::linalg::inf_norm;
use crate::model::{DesignObjective, NonlinearGame};

/// Bounded problem over `w = (z, p)`.
struct DesignProblem<'a> {
    game: &'a NonlinearGame,
    design: &'a DesignObjective,
    rho: f64,
    layout: KKTLayout,
}

impl DesignProblem<'_> {
    fn unpack(&self, w: &[f64]) -> (KKTVector, Vec<f64>) {
        let t = self.layout.total();
        (
            KKTVector {
                data: w[..t].to_vec(),
                layout: self.layout.clone(),
            },
            w[t..].to_vec(),
        )
    }
}

impl BoundedProblem for DesignProblem<'_> {
    fn dim(&self) -> usize {
        self.layout.total() + self.game.n_p()
    }
    fn lower(&self) -> Vec<f64> {
        let mut v = vec![f64::NEG_INFINITY; self.layout.total()];
        v.extend_from_slice(&self.game.params.lower);
        v
    }
    fn upper(&self) -> Vec<f64> {
        let mut v = vec![f64::INFINITY; self.layout.total()];
        v.extend_from_slice(&self.game.params.upper);
        v
    }
    fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (z, p) = self.unpack(w);
        let s = self.rho.sqrt();
        Ok(residual(self.game, &z, &p)?.into_iter().map(|v| s * v).collect())
    }
    fn jacobian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        let (z, p) = self.unpack(w);
        Ok(residual_jacobian(self.game, &z, &p, Wrt::ZAndP)? * self.rho.sqrt())
    }
    fn extra_cost(&self, w: &[f64]) -> Result<Option<ExtraCost>> {
        let (z, p) = self.unpack(w);
        let n = self.layout.n();
        let t = self.layout.total();
        let dim = self.dim();
        let (mut value, gj, hj) = self.design.derivatives(z.x(), &p)?;
        // design columns are (x, p); x sits at the front of z and p after z
        let col = |c: usize| if c < n { c } else { t + (c - n) };
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for a in 0..gj.len() {
            grad[col(a)] += gj[a];
            for b in 0..gj.len() {
                hess[(col(a), col(b))] += hj[(a, b)];
            }
        }
        let a2 = self.design.alpha2;
        if a2 > 0.0 {
            for k in 0..n {
                value += a2 * w[k] * w[k];
                grad[k] += 2.0 * a2 * w[k];
                hess[(k, k)] += 2.0 * a2;
            }
        }
        Ok(Some(ExtraCost { value, grad, hess }))
    }
}

/// Keep the refined point when its residual is no larger.
pub(crate) fn refine(
    game: &NonlinearGame,
    design: &DesignObjective,
    mut base: NLSResult,
    cfg: &LMConfig,
) -> Result<NLSResult> {
    base.unrefined_residual_norm = Some(base.residual_norm);
    let mut refined = solve_gne_nls(game, &base.p, &base.z, &LMConfig { certify: false, ..cfg.clone() })?;
    let out = if refined.residual_norm <= base.residual_norm {
        refined.iterations += base.iterations;
        refined.unrefined_residual_norm = base.unrefined_residual_norm;
        let mut trace = std::mem::take(&mut base.trace);
        trace.extend(refined.trace.drain(..));
        refined.trace = trace;
        refined
    } else {
        base
    };
    Ok(finish(game, design, out, cfg))
}

fn finish(game: &NonlinearGame, design: &DesignObjective, mut r: NLSResult, cfg: &LMConfig) -> NLSResult {
    r.design_value = Some(design.value_with_reg(r.z.x(), &r.p));
    if cfg.certify {
        r.certificate = Some(best_response_certificate(game, r.z.x(), &r.p, CERT_TOL));
    }
    r
}

/// Penalized design solve from `(z0, p0)`, then refinement at fixed `p*`.
/// Designs with `α1 > 0` go through [`super::sparse::solve_sparse`].
pub fn solve_design(
    game: &NonlinearGame,
    design: &DesignObjective,
    cfg: &LMConfig,
    z0: &KKTVector,
    p0: &[f64],
) -> Result<NLSResult> {
    if design.alpha1 > 0.0 {
        return Err(Error::InvalidRegularization(
            "alpha1 > 0 needs the split formulation (solve_sparse)".into(),
        ));
    }
    design.validate(game.n(), game.n_p()).into_result()?;
    check_start(game, p0, z0)?;
    let prob = DesignProblem {
        game,
        design,
        rho: cfg.rho,
        layout: z0.layout.clone(),
    };
    let mut w0 = z0.data.clone();
    w0.extend_from_slice(p0);
    let out = solve_bounded(&prob, &w0, cfg)?;
    let (z, p) = prob.unpack(&out.w);
    let r = residual(game, &z, &p)?;
    let base = NLSResult {
        residual_norm: inf_norm(&r),
        z,
        p,
        iterations: out.iterations,
        status: out.status,
        certificate: None,
        trace: out.trace,
        design_value: None,
        unrefined_residual_norm: None,
    };
    refine(game, design, base, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Ad, ScalarFn};
    use crate::model::{ParamBox, PlayerLayout};
    use std::sync::Arc;

    fn follower() -> NonlinearGame {
        // f = ½ (x − p)²
        let f: Arc<ScalarFn> = Arc::new(|x, p| {
            let d = x[0] - p[0];
            d * d * Ad::cst(0.5)
        });
        NonlinearGame::new(PlayerLayout::uniform(1, 1).unwrap(), vec![f])
            .with_params(ParamBox::new(vec![0.0], vec![10.0]))
    }

    #[test]
    fn separable_design() {
        let g = follower();
        let j: Arc<ScalarFn> = Arc::new(|_x, p| {
            let d = p[0] - Ad::cst(3.0);
            d * d
        });
        let design = DesignObjective::from_fn(j);
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &[0.0]);
        let r = solve_design(&g, &design, &LMConfig::default(), &z0, &[5.0]).unwrap();
        assert!((r.p[0] - 3.0).abs() < 1e-4, "{:?}", r.p);
        assert!((r.x()[0] - 3.0).abs() < 1e-4);
        assert!(r.residual_norm <= r.unrefined_residual_norm.unwrap());
    }

    #[test]
    fn degenerate_design_is_equilibrium_solve() {
        let g = follower().with_params(ParamBox::singleton(&[2.0]));
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &[0.0]);
        let r = solve_design(&g, &DesignObjective::zero(), &LMConfig::default(), &z0, &[2.0]).unwrap();
        assert!(r.residual_norm <= 1e-8);
        assert!((r.x()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn l1_rejected() {
        let g = follower();
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &[0.0]);
        let d = DesignObjective::zero().with_regularization(1.0, 0.0);
        assert!(matches!(
            solve_design(&g, &d, &LMConfig::default(), &z0, &[1.0]),
            Err(Error::InvalidRegularization(_))
        ));
    }
}
