//! Conditional and autoencoding-conditional Wasserstein GANs for asset-price
//! scenario generation, with stylized-facts statistics and Sharpe-maximizing
//! portfolio backtests.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it for the common cases.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod facts;
pub mod gan;
pub mod network;
pub mod portfolio;
pub mod random;
pub mod scalar;
pub mod scenario;
pub mod svg;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type PriceMatrix64 = data::PriceMatrix<f64>;
pub type PriceMatrix32 = data::PriceMatrix<f32>;
pub type GanBundle64 = gan::GanBundle<f64>;
pub type GanBundle32 = gan::GanBundle<f32>;
pub type ScenarioSet64 = scenario::ScenarioSet<f64>;
pub type ScenarioSet32 = scenario::ScenarioSet<f32>;
