//! Decision procedures and strategy synthesis for one-counter Markov
//! decision processes (OC-MDPs), with exact rational arithmetic.
//!
//! - [`model`]: OC-MDPs, finite reward MDPs, solvency games, strategies and
//!   their text formats.
//! - [`chain`], [`finmdp`]: finite Markov chain and MDP analytics.
//! - [`qualmp`], [`cn`]: qualitative mean-payoff and cover-negative
//!   objectives, and the OC-MDP value computation built on them.
//! - [`termination`]: non-selective and selective termination.
//! - [`solvency`]: qualitative bankruptcy in solvency games.
//! - [`oracle`]: simulation and brute-force cross-checks.

pub mod chain;
pub mod cn;
pub mod finmdp;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod qualmp;
pub mod solvency;
pub mod termination;

#[cfg(test)]
pub(crate) mod testutil;

pub use model::{
    CmdStrategy, Config, CounterRegularStrategy, FiniteMdp, MdStrategy, ModelError, OcMdp, Owner, Rational,
    SolvencyGame,
};
