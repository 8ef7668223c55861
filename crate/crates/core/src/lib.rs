//! Joint admission control and resource-block scheduling for URLLC users.
//!
//! Two channel models are supported. In the *continuous* model every assigned
//! resource block contributes to the finite-blocklength success probability of
//! its user (see [`blocklength`]). In the *binary* model a block is either
//! active or inactive for a user, and user `k` needs `d_k` active blocks.
//!
//! The crate provides:
//!
//! - [`blocklength`]: normal-approximation frame error probability, required
//!   block counts and per-level SNR thresholds.
//! - [`model`]: SNR grids, binary instances, schedules, random scenario
//!   generation and schedule verification.
//! - [`feasibility`]: the randomized-cost relaxed LP that decides whether a
//!   user set is schedulable, with a max-flow cross-check.
//! - [`admission`]: GREEDY admission, maximum-weight matching for `d = 1` and
//!   an exact branch-and-bound oracle.
//! - [`continuous`]: the random-placement baseline and the Iterative
//!   Thresholding Algorithm (ITA).
//! - [`reduction`]: the independent-set to URLLC instance construction.
//! - [`experiment`]: seeded Monte-Carlo runs, CSV output and summaries.

pub mod admission;
pub mod blocklength;
pub mod continuous;
pub mod error;
pub mod experiment;
pub mod feasibility;
pub mod flow;
pub mod lp;
pub mod model;
pub mod reduction;
pub mod seed;

pub use error::{Error, Result};
