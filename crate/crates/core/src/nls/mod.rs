//! Nonlinear least-squares route: LM solver, equilibrium and design solves,
//! best-response certificates.

pub mod lm;
pub mod certificate;
pub mod design;
pub mod gne;
pub mod sparse;

pub use certificate::{best_response_certificate, lq_best_response, lq_certificate, Certificate, PlayerCertificate, CERT_TOL};
pub use design::solve_design;
pub use gne::{solve_gne_nls, NLSResult};
pub use lm::{solve_bounded, BoundedProblem, LMConfig, LMOutcome, LMStatus};
pub use sparse::solve_sparse;
