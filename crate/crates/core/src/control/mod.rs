//! Noncooperative LQR and MPC on a shared discrete-time linear system
//! `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)`, with the columns of `B`
//! split among agents.

mod lqr;
mod mpc;

pub use lqr::{
    centralized_lqr, finite_horizon_lqr, lqr_best_response_gain, riccati, solve_lqr_game, LQRGameResult, LQRGameSpec,
    Mat, RiccatiResult,
};
pub use mpc::{
    build_mpc_game, mpc_step, predicted_costs, prediction, simulate_mpc, write_trace_csv, ClosedLoopTrace,
    MPCGameSpec, MpcConfig, MpcMode, MpcStep, Prediction, TraceStep,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::PlayerLayout;

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Input columns owned by each agent, in order.
    pub inputs: PlayerLayout,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, inputs: PlayerLayout) -> Result<Self> {
        let sys = LinearSystem { a, b, c, inputs };
        sys.validate()?;
        Ok(sys)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn agents(&self) -> usize {
        self.inputs.players()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n || self.b.nrows() != n || self.c.ncols() != n {
            return Err(Error::Dimension("system matrices do not agree on n_x".into()));
        }
        if self.inputs.n() != self.b.ncols() {
            return Err(Error::Dimension(format!(
                "input partition covers {} columns, B has {}",
                self.inputs.n(),
                self.b.ncols()
            )));
        }
        Ok(())
    }

    /// Columns of `B` owned by agent `i`.
    pub fn b_agent(&self, i: usize) -> DMatrix<f64> {
        let r = self.inputs.range(i);
        self.b.columns(r.start, r.len()).into_owned()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let xv = nalgebra::DVector::from_column_slice(x);
        let uv = nalgebra::DVector::from_column_slice(u);
        (&self.a * xv + &self.b * uv).as_slice().to_vec()
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        (&self.c * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }
}
