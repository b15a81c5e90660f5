//! Benchmarking of attribution methods on synthetic climate-style maps.

pub mod benchmark;
pub mod config;
pub mod datagen;
pub mod error;
pub mod explain;
mod io;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
