//! Closed-form conjugate sub-posteriors.
//!
//! The Bernoulli–Beta and flat-prior linear-regression models have exact
//! full-data and per-shard posteriors under every method, which makes them the
//! reference against which the variance behaviour of likelihood inflation and
//! prior tempering is checked.

mod bernoulli;
mod laplace;
mod linreg;

pub use bernoulli::{bernoulli_subposterior, beta_variance, BernoulliBatch, BetaParams};
pub use laplace::{laplace_summary, LaplaceSummary};
pub use linreg::{
    combine_weighted, linreg_full_gibbs, linreg_lisa_gibbs, sample_inv_gamma, LinRegDraws,
    LinRegMoments,
};
