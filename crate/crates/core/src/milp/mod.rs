//! Exact equilibria of LQ games through a big-M mixed-integer encoding of
//! the players' KKT conditions.

mod bnb;
mod build;
mod model;
mod mps;
mod solve;

pub use bnb::{branch_and_bound, BnbConfig, BnbOutcome, BnbStatus};
pub use build::{assemble_player_kkt, build_mip, ActiveSetSignature, GameMip, LqKKT, PlayerKKT, VarMap};
pub use model::{MipModel, MipRow, MipVar, Sense};
pub use mps::{export_mps, parse_mps, write_mps};
pub use solve::{
    distance, enumerate_equilibria, enumerate_on, kkt_vector, solve_inverse_lq, solve_mip, InverseResult, MipConfig,
    MipResult, MipStatus, MipWarning, DEFAULT_BIG_M,
};
