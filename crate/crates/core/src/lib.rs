//! Online Bayesian passive-aggressive regression.
//!
//! A streaming state-space regressor with an epsilon-insensitive noise
//! model, inferred by a single-pass variational scheme, plus a self-tuning
//! variant that adapts its own hyperparameters online. Two baselines (an
//! adaptive sequential Kalman filter and a frequentist PA-I regressor), the
//! forecast/trading metrics used to compare them, and a pairs-trading
//! backtest driver round out the crate.
//!
//! Layout:
//! - [`special`]: Bessel/normal-CDF numerics behind the variational updates
//! - [`dist`]: noise densities, priors, truncated-Gaussian moments
//! - [`filter`]: Gaussian weight belief and Kalman-style moment updates
//! - [`govi`]: the per-observation fixed-point engine
//! - [`ada`]: hyperparameter adaptation on top of the engine
//! - [`baselines`]: sequential Kalman filter and PA-I regressor
//! - [`metrics`], [`backtest`]: evaluation harness
//! - [`series`], [`synth`], [`config`], [`run`]: data plumbing and drivers
//!
//! A single filter is strictly sequential; independent streams are
//! embarrassingly parallel. With the `parallel` feature (default on),
//! [`run::run_many`] fans streams out over a rayon pool; without it the
//! same call degrades to the sequential loop.

pub mod ada;
pub mod backtest;
pub mod baselines;
pub mod config;
pub mod dist;
pub mod error;
pub mod filter;
pub mod govi;
pub mod metrics;
pub mod quad;
pub mod run;
pub mod series;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
