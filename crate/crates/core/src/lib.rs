//! Forecasting and sustainability benchmark for bio-inspired and conventional
//! models on multivariate cellular traffic.
//!
//! - [`data`]: CSV ingestion, synthetic traffic, windowing, splits, scaling.
//! - [`autodiff`]: tape-based reverse-mode differentiation.
//! - [`models`]: spiking neuron dynamics, the eight forecaster architectures.
//! - [`training`]: Adam, mini-batch epochs, early stopping.
//! - [`federated`]: FedAvg simulation with exchanged-byte accounting.
//! - [`evaluation`]: error metrics, energy model, sustainability index.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod federated;
pub mod models;
pub mod par;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
