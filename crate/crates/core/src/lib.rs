//! Active estimation of two-point correlation pair counts.
//!
//! A catalog of detected sources is turned into one graph per separation bin.
//! An edge is "true" when both endpoints are targets. Given classifier
//! probabilities for every source, the crate estimates the number of true
//! edges per bin from a small, adaptively chosen set of labeled sources:
//!
//! * [`catalog`] loads, validates and simulates source catalogs.
//! * [`binning`] builds log-spaced bins, the per-bin edge lists and
//!   `DD/RR - 1` correlation estimates.
//! * [`estimators`] holds the edge score model and the subset Monte Carlo and
//!   importance sampling estimators.
//! * [`sampler`] draws subsets proportional to their predicted edge count and
//!   drives the multi-bin labeling [`Session`](sampler::Session).
//! * [`variance`] provides variance estimates and confidence intervals.
//! * [`experiments`] runs batches of simulated-annotator trials.

pub mod binning;
pub mod catalog;
pub mod combin;
mod error;
pub mod estimators;
pub mod exec;
pub mod experiments;
pub mod rng;
pub mod sampler;
pub mod variance;

pub use error::{Error, Result};
pub use exec::Execution;

/// Dense vertex index into a catalog.
pub type VertexId = u32;
