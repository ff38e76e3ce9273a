//! Feedback-controlled spin dynamics for binary optimisation.
//!
//! * [`problem`]: k-SAT instances, their multilinear (HUBO) Hamiltonian, DIMACS I/O.
//! * [`classical`]: classical unit-spin solvers (CC-FALQON, CC-iFALQON, CACAO,
//!   HOT-CACAO, HOT-CACAO+).
//! * [`quantum`]: exact statevector FALQON / iFALQON for small instances.
//! * [`oracles`]: independent checks (canonical chart, finite differences).
//! * [`harness`]: experiment orchestration behind the `spinfeed` CLI.

pub mod classical;
pub mod error;
pub mod harness;
pub mod oracles;
pub mod problem;
pub mod quantum;
pub mod trajectory;

pub use error::{Error, Result};
