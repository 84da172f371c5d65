//! Algorithmic core for learning when to treat ongoing cases.
//!
//! Everything in this crate operates on plain feature matrices and stays
//! deterministic under a fixed seed. The crate is `no_std`-compatible
//! (`alloc` required); IO, event-log parsing, and the CLI live in the
//! companion `treatkit` crate.
//!
//! The pieces, in pipeline order:
//!
//! - [`gbdt`]: gradient-boosted tree classifier producing outcome
//!   probabilities per prefix.
//! - [`conformal`]: split conformal calibration on top of the classifier,
//!   yielding prediction sets and the ternary rho confidence score.
//! - [`causal`]: honest causal trees and a grouped-subsample causal forest
//!   for CATE point estimates and confidence intervals.
//! - [`generator`]: encoder + per-arm Bernoulli heads generating both
//!   potential outcomes for every prefix.
//! - [`stattests`]: permutation two-sample tests validating generated
//!   against real outcomes.
//! - [`policy`]: the replay environment, gain/cost reward, and a clipped
//!   policy-gradient agent.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod causal;
pub mod conformal;
pub mod data;
pub mod gbdt;
pub mod generator;
pub mod math;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod stattests;

pub use data::FeatureMatrix;
