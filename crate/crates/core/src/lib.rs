//! Deterministic proof-of-stake chain simulator.

pub mod ante;
pub mod blocks;
pub mod bundled;
pub mod coins;
pub mod config;
pub mod distribution;
pub mod error;
pub mod fees;
pub mod fraction;
pub mod governance;
pub mod ledger;
pub mod report;
pub mod scenario;
pub mod simulator;
pub mod staking;
pub mod state;
pub mod treasury;

pub use error::{Error, Result};
