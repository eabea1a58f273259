//! Accelerated stochastic optimization laboratory.
//!
//! The crate is organised around the semi-implicit NAG-GS stepper and the
//! tooling needed to study it:
//!
//! - [`optimizers`]: NAG-GS, the fully implicit NAG-FI variant, and SGD-momentum
//!   and AdamW baselines behind one stepping interface.
//! - [`quadratic_analysis`]: iteration matrix, closed-form eigenvalues,
//!   optimal and critical step sizes, stationary covariance.
//! - [`sde_lab`]: seeded Monte Carlo ensembles for quadratic and scalar SDE studies.
//! - [`dist_metrics`]: KS, Wasserstein-1 and k-NN KL estimators plus Gibbs densities.
//! - [`spectrum`]: matrix-free extreme eigenvalue estimation.
//! - [`problems`]: quadratic, scalar non-convex and logistic-regression objectives.
//! - [`training`]: epoch loops and learning-rate grids for logistic regression.

pub mod dist_metrics;
pub mod error;
pub mod optimizers;
pub mod problems;
pub mod quadratic_analysis;
pub mod rng;
pub mod sde_lab;
pub mod spectrum;
pub mod training;

mod vecops;

pub use error::{Error, Result};
pub use optimizers::{
    GradientOracle, NagFiConfig, NagGsConfig, Optimizer, OptimizerState, TrainState,
};

pub use quadratic_analysis::{
    critical_alpha, optimal_alpha, SpectrumConfig, StabilityReport, StationaryCovariance,
};
