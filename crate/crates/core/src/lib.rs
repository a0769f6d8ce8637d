//! Fair sheaf diffusion.
//!
//! Fairness constraints are encoded as graph topologies over the data rows
//! (nearest neighbours, distance balls, group aggregators). Cellular-sheaf
//! Laplacians on those graphs drive a diffusion that pulls covariates,
//! logits or coefficients toward the Laplacian kernel, where the encoded
//! constraints hold. The crate also ships the fairness metric suite, closed
//! form SHAP attributions for plain and diffused linear models, and a grid
//! search driver with Pareto-front extraction.

pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod explain;
pub mod metrics;
pub mod model;
pub mod sheaf;
pub mod sparse;
pub mod topology;

pub use error::{Error, Result};
