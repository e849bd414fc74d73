//! Unsupervised detection and classification of three-phase power-system
//! faults.
//!
//! Measurements are cut into short segments, each segment is reduced to one
//! coordinate by Hessian locally linear embedding, and a Mann-Whitney rank
//! test against a reference segment flags distribution changes. Detected
//! events are summarized into feature vectors, embedded with t-SNE and
//! clustered with a Gaussian mixture.

pub mod detector;
pub mod error;
pub mod gmm;
pub mod hlle;
pub mod metrics;
pub mod pipeline;
pub mod ranktest;
pub mod signal;
pub mod tsne;

pub use error::{Error, Result};
