//! Counterfactual-explanation benchmark library.
//!
//! Everything needed to reproduce the comparison between latent-space and
//! feature-space counterfactual generators over a small binary image
//! classifier:
//!
//! - [`ndnet`] — minimal dense-network core: tensors, forward, backprop to
//!   parameters and inputs, SGD.
//! - [`dataio`] — IDX (MNIST-style) parsing, class filtering, normalization.
//! - [`models`] — training and persistence for the classifier and autoencoder.
//! - [`cfgen`] — the five counterfactual generators and their loss machinery.
//! - [`metrics`] — in-distribution score (per-pixel KDE), sparsity, timing
//!   aggregation.
//! - [`synth`] — deterministic stand-in digit corpus for offline runs.
//!
//! All types are immutable once built and safe to share across threads; the
//! generators are pure given their inputs, so callers may fan requests out
//! over a thread pool.

pub mod cfgen;
pub mod dataio;
mod error;
pub mod metrics;
pub mod models;
pub mod ndnet;
pub mod synth;

pub use error::{Error, Result};
