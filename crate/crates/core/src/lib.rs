//! Computing, enumerating and designing generalized Nash equilibria.
//!
//! Two solution routes share one data model:
//!
//! - Nonlinear games are solved through the joint KKT system of all players.
//!   Complementarity is encoded with the Fischer–Burmeister function and the
//!   resulting residual `R(z, p)` is driven to zero by a (projected)
//!   Levenberg–Marquardt solver ([`nls`]).
//! - Linear–quadratic games are solved exactly as mixed-integer programs with
//!   big-M complementarity constraints and branch-and-bound ([`milp`]), which
//!   also enumerates distinct equilibria through no-good cuts.
//!
//! The [`control`] module builds noncooperative LQR and MPC games on top of
//! both routes.

pub mod control;
pub mod convexcore;
pub mod diff;
pub mod error;
pub mod instances;
pub mod kkt;
pub mod linalg;
pub mod milp;
pub mod model;
pub mod nls;

pub use error::{Error, Result};
