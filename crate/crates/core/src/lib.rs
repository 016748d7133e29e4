//! Adaptive detection for two crossed uniform linear arrays observing a common
//! target in compound-Gaussian clutter with a different texture on each array.

pub mod clutter;
pub mod config;
pub mod cube;
pub mod detectors;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use linalg::C64;
