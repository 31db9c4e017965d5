//! Risk-averse distributional reinforcement learning with an extreme-value
//! tail critic.
//!
//! The critic models the body of the (negated) return distribution with a
//! fixed grid of quantile atoms and the tail above a threshold level `eta`
//! with a Generalized Pareto Distribution fitted by gradient-ascent MLE.
//! Policies are improved greedily on CVaR of the composite distribution.
//!
//! Modules:
//! - [`gpd`]: Generalized Pareto kernel (cdf/quantile/log-pdf/gradients/MLE)
//! - [`quantile`]: quantile table, pinball/Huber losses, QR updates, CVaR
//! - [`critic`]: composite body+tail critic, target sampling, contraction check
//! - [`env`]: small tabular MDPs with rare-penalty reward structure
//! - [`agent`]: CVaR-greedy training loop and policy evaluation
//! - [`analysis`]: asymptotic-variance formulas, Wasserstein distance,
//!   estimator variance study, model-fidelity report

pub mod agent;
pub mod analysis;
pub mod critic;
pub mod env;
pub mod error;
pub mod gpd;
pub mod io;
pub mod parallel;
pub mod quantile;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RandomStream;
