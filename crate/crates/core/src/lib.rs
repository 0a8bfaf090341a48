//! Exact Efron–Stein analysis of ordering constraint satisfaction problems
//! and a decision procedure for "at least AVG + t constraints satisfiable".

pub mod bonami;
pub mod chain;
pub mod cli;
pub mod decider;
pub mod efron_stein;
pub mod error;
pub mod exact;
pub mod instance;
pub mod oracle;
pub mod perm;
pub mod report;

pub use error::{Error, Result};
