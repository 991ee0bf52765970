//! Conditional nonparametric multilevel latent class analysis.
//!
//! Individuals (level 1) are nested in sites (level 2). Each site belongs to
//! one of `M` discrete site classes; each individual belongs to one of `L`
//! individual classes whose probabilities depend on the site class, on
//! individual covariates and on site covariates (cross-level effects).
//! Categorical indicators are locally independent given the individual class.
//!
//! The crate provides
//!
//! - [`model`]: domain types and the exact log-likelihood,
//! - [`estimator`]: multi-start generalized EM, observed-information standard
//!   errors, modal classification and Wald tests,
//! - [`simulator`]: the 96-condition simulation design and data generation,
//! - [`alignment`]: label-switching detection and relabeling,
//! - [`metrics`]: Monte-Carlo recovery, power, classification and eta-squared summaries,
//! - [`harness`]: file formats, the resumable replication runner and report tables
//!   behind the `npmlca` command-line tool.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod alignment;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod math;
pub mod metrics;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{Dataset, Individual, ModelSpec, Parameters, Site, Truth};
