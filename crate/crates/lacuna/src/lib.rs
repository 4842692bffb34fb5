//! Differentially private synthetic tabular data from datasets with missing values.
//!
//! The crate is organised around the lifecycle of an incomplete table:
//!
//! * [`tabular`] — schemas, datasets with an explicit missingness mask,
//!   discretization, complete-row filtering, and contingency tables.
//! * [`missing`] — MCAR/MAR/MNAR missingness injectors and missing-probability
//!   estimation.
//! * [`dp`] — Laplace/Gaussian/exponential mechanisms, budget ledgers, and a
//!   Rényi-DP accountant for subsampled Gaussian training loops.
//! * [`synth`] — the generators: Bayesian-network synthesis with partial-marginal
//!   observation, column-sequence synthesis with in-loop imputation, and the
//!   vanilla complete-row / impute-first pipelines.
//! * [`amplify`] — ground-truth privacy accounting over the *complete* data:
//!   imputation stability costs, subsampling amplification, and the optimal
//!   attribute-partition search.
//! * [`metrics`] — k-way marginal distances and a synthetic-train/real-test F1
//!   protocol with built-in classifiers.
//! * [`grid`] — the benchmark grid runner behind the CLI's `bench` subcommand.
//!
//! All randomness flows through caller-seeded ChaCha generators; identical seeds
//! give byte-identical outputs everywhere.

pub mod amplify;
pub mod dp;
mod error;
pub mod grid;
pub mod jsonio;
pub mod metrics;
pub mod missing;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
