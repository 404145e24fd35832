//! Distributed Bayesian inference by likelihood inflation.
//!
//! Data are split into K shards; each shard runs an independent sampler whose
//! likelihood is raised to the power K (or whose prior is tempered by 1/K),
//! and the shard draws are pooled afterwards. The sampler engine is a
//! from-scratch BART implementation; conjugate Bernoulli and linear-regression
//! samplers cover the closed-form cases.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bart;
pub mod config;
pub mod conjugate;
pub mod data;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod orchestrate;
pub mod report;
pub mod rng;

pub use config::{CombineRule, Method, MethodConfig};
pub use data::{load_csv, partition, CategoricalPolicy, Dataset, Shard};
pub use draws::DrawMatrix;
pub use error::{Error, Result};
pub use generate::{Generator, Simulated};
pub use rng::RngStream;
