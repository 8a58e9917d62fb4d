//! Equilibrium computation by driving the joint KKT residual to zero.

use nalgebra::DMatrix;

use super::certificate::{best_response_certificate, Certificate, CERT_TOL};
use super::lm::{solve_bounded, BoundedProblem, LMConfig, LMStatus, TraceRow};
use crate::error::{Error, Result};
use crate::kkt::{residual, residual_jacobian, KKTLayout, KKTVector, Wrt};
use crate::linalg::inf_norm;
use crate::model::NonlinearGame;

#[derive(Debug, Clone)]
pub struct NLSResult {
    pub z: KKTVector,
    pub p: Vec<f64>,
    /// `‖R(z, p)‖∞` of the unscaled KKT residual.
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: LMStatus,
    pub certificate: Option<Certificate>,
    pub trace: Vec<TraceRow>,
    /// `J(x, p)` including regularization, for design solves.
    pub design_value: Option<f64>,
    /// `‖R‖∞` before hot-start refinement, for design solves.
    pub unrefined_residual_norm: Option<f64>,
}

impl NLSResult {
    pub fn x(&self) -> &[f64] {
        self.z.x()
    }

    pub fn certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.pass)
    }
}

struct GneProblem<'a> {
    game: &'a NonlinearGame,
    p: &'a [f64],
    layout: KKTLayout,
}

impl GneProblem<'_> {
    fn point(&self, w: &[f64]) -> KKTVector {
        KKTVector {
            data: w.to_vec(),
            layout: self.layout.clone(),
        }
    }
}

impl BoundedProblem for GneProblem<'_> {
    fn dim(&self) -> usize {
        self.layout.total()
    }
    fn residual(&self, w: &[f64]) -> Result<Vec<f64>> {
        residual(self.game, &self.point(w), self.p)
    }
    fn jacobian(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        residual_jacobian(self.game, &self.point(w), self.p, Wrt::Z)
    }
}

pub(crate) fn check_start(game: &NonlinearGame, p: &[f64], z0: &KKTVector) -> Result<()> {
    if p.len() != game.n_p() {
        return Err(Error::Dimension(format!("parameter has length {}, game needs {}", p.len(), game.n_p())));
    }
    if game.n_p() > 0 && !game.params.contains(p, 1e-12) {
        return Err(Error::InvalidGame("parameter outside its box".into()));
    }
    let want = KKTLayout::for_game(game, z0.layout.variational);
    if want != z0.layout || z0.data.len() != want.total() {
        return Err(Error::Dimension("start point layout does not match the game".into()));
    }
    Ok(())
}

/// Minimize `½‖R(z, p0)‖²` over `z` starting at `z0`. The layout of `z0`
/// selects the variational (shared multiplier) form.
pub fn solve_gne_nls(game: &NonlinearGame, p0: &[f64], z0: &KKTVector, cfg: &LMConfig) -> Result<NLSResult> {
    check_start(game, p0, z0)?;
    let prob = GneProblem {
        game,
        p: p0,
        layout: z0.layout.clone(),
    };
    let out = solve_bounded(&prob, &z0.data, cfg)?;
    let z = prob.point(&out.w);
    let certificate = (cfg.certify && out.status == LMStatus::Converged)
        .then(|| best_response_certificate(game, z.x(), p0, CERT_TOL));
    Ok(NLSResult {
        residual_norm: inf_norm(&out.residual),
        z,
        p: p0.to_vec(),
        iterations: out.iterations,
        status: out.status,
        certificate,
        trace: out.trace,
        design_value: None,
        unrefined_residual_norm: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Ad, ScalarFn};
    use crate::instances::reference_lq_game;
    use crate::model::PlayerLayout;
    use std::sync::Arc;

    #[test]
    fn scalar_stationarity() {
        let f: Arc<ScalarFn> = Arc::new(|x, _| {
            let d = x[0] - Ad::cst(2.0);
            d * d
        });
        let g = NonlinearGame::new(PlayerLayout::uniform(1, 1).unwrap(), vec![f]);
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &[0.0]);
        let r = solve_gne_nls(&g, &[], &z0, &LMConfig::default()).unwrap();
        assert_eq!(r.status, LMStatus::Converged);
        assert!((r.x()[0] - 2.0).abs() < 1e-8);
        assert!(r.certified());
    }

    #[test]
    fn pair_game_equal_components() {
        let f: Arc<ScalarFn> = Arc::new(|x, _| (x[0] - x[1]) * (x[0] - x[1]));
        let g = NonlinearGame::new(PlayerLayout::uniform(2, 1).unwrap(), vec![f.clone(), f]);
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, false), &[1.0, 0.0]);
        let r = solve_gne_nls(&g, &[], &z0, &LMConfig::default()).unwrap();
        assert!(r.residual_norm <= 1e-8);
        assert!((r.x()[0] - r.x()[1]).abs() < 1e-6);
    }

    #[test]
    fn variational_reference_game_certified() {
        let g = reference_lq_game().to_nonlinear();
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, true), &[0.0; 6]);
        let r = solve_gne_nls(&g, &[], &z0, &LMConfig::default()).unwrap();
        assert_eq!(r.status, LMStatus::Converged, "{}", r.residual_norm);
        assert!(r.certified());
    }

    #[test]
    fn layout_mismatch_rejected() {
        let g = reference_lq_game().to_nonlinear();
        let z0 = KKTVector::initial(KKTLayout::for_game(&g, true), &[0.0; 6]);
        let mut bad = z0.clone();
        bad.layout.n_g = 3;
        assert!(solve_gne_nls(&g, &[], &bad, &LMConfig::default()).is_err());
    }
}
