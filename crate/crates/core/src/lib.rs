//! Bayesian single-hidden-layer networks with l1-bounded inner weights: Gibbs posteriors,
//! the Gaussian auxiliary-variable coupling that splits them into log-concave pieces, a
//! two-stage Langevin sampler built on that split, exact small-scale oracles, and
//! calculators for the accompanying regret and risk bounds.

pub mod coupling;
pub mod error;
pub mod estimators;
pub mod nnmodel;
pub mod par;
pub mod priors;
pub mod risk;
pub mod rng;
pub mod samplers;
pub mod stats;

pub use error::{Error, Result};
pub use par::Exec;
