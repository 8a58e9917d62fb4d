//! ℓ1-regularized design through the split `x = x_p − x_m`.

use super::design::{refine, solve_design};
use super::gne::{check_start, NLSResult};
use super::lm::{solve_bounded, LMConfig};
use crate::error::Result;
use crate::kkt::{residual, split_l1};
use crate::linalg::inf_norm;
use crate::model::{DesignObjective, NonlinearGame};
use crate::kkt::KKTVector;

/// Bound-constrained LM over `(p, x_p, x_m, ν)`, then refinement at `p*`.
/// With `α1 = 0` this is [`solve_design`].
pub fn solve_sparse(
    game: &NonlinearGame,
    design: &DesignObjective,
    cfg: &LMConfig,
    z0: &KKTVector,
    p0: &[f64],
) -> Result<NLSResult> {
    if design.alpha1 == 0.0 {
        return solve_design(game, design, cfg, z0, p0);
    }
    design.validate(game.n(), game.n_p()).into_result()?;
    check_start(game, p0, z0)?;
    let prob = split_l1(game, design, cfg.rho, z0.layout.variational)?;
    let w0 = prob.pack(p0, z0);
    let out = solve_bounded(&prob, &w0, cfg)?;
    let (p, z) = prob.unpack(&out.w);
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
