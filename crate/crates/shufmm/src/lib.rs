//! Shuffling gradient methods for finite-sum nonconvex-linear and
//! nonconvex-strongly-concave minimax problems.

pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod solver_nc;
pub mod solver_nl;
pub mod trace;

pub use error::{Error, Result};
