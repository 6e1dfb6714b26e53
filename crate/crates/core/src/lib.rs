//! Multi-view sequence classification engine for lipreading-style tasks.
//!
//! The pipeline: per-view bottleneck encoders (optionally pretrained with
//! Gaussian RBMs) produce compact frame features, delta/delta-delta features
//! are appended, a per-view BLSTM models temporal dynamics, a fusion BLSTM
//! combines the views, and a per-frame softmax plus majority vote labels each
//! utterance. Training, evaluation and the view-combination sweep harness are
//! included, along with a synthetic multi-view data generator for small-scale
//! verification.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod ndcore;
pub mod net;
pub mod rbm;
pub mod train;

pub use error::{Error, Result};
