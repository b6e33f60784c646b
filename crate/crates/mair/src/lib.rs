//! Margin-aware instance-reweighted adversarial training for small dense
//! classifiers.
//!
//! The crate trains MLP classifiers under L∞-bounded gradient attacks,
//! measures per-instance geometric margins in probability space, turns those
//! margins into per-instance loss weights, and provides a harness for
//! comparing measurement and training-objective choices on synthetic and
//! small file-based datasets.
//!
//! Module map:
//!
//! - [`nn`] — dense networks, exact reverse-mode gradients, softmax/CE/KL.
//! - [`attack`] — PGD, line-search & momentum PGD, and CW/KL ascent variants.
//! - [`margin`] — probabilistic margins, logit margins, and least-step counts.
//! - [`weight`] — margin-to-weight assignment with burn-in gating.
//! - [`objective`] — AT/TRADES/MART losses and their reweighted versions.
//! - [`train`] — SGD training loop, schedules, checkpointing.
//! - [`data`] — synthetic generators plus CSV/IDX ingestion.
//! - [`experiment`] — robustness evaluation, measurement studies, ablations.
//!
//! Every run is bitwise deterministic given its seed: random draws come from
//! counter-derived ChaCha streams and all reductions happen in fixed order.

pub mod attack;
pub mod data;
pub mod error;
pub mod experiment;
pub mod margin;
pub mod nn;
pub mod objective;
pub mod rng;
pub mod train;
pub mod weight;

pub use error::{Error, Result};
