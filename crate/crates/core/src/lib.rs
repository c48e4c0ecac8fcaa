//! Adaptive allocation procedures for two-arm and multi-arm sequential
//! trials, the downcrossing solvers that give their limiting allocation
//! proportions, and a seeded Monte Carlo engine that checks those limits.

pub mod aa;
pub mod cara;
pub mod downcrossing;
pub mod error;
pub mod func;
pub mod limit;
pub mod models;
pub mod ra;
pub mod sim;
pub mod state;
pub mod strata;
pub mod verify;

pub use error::{Error, Result};
