//! Memory-bounded sparse feature selection.
//!
//! Linear models are trained by adding stochastic gradients into a
//! [`CountSketch`](countsketch::CountSketch) and keeping the heaviest
//! coordinates in a bounded [`TopKHeap`](topk::TopKHeap). The crate also
//! ships the iterative hard thresholding and feature hashing baselines, a
//! libsvm/token ingestion layer, evaluation metrics and a harness for the
//! synthetic sparse-recovery studies.

pub mod countsketch;
pub mod data;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod topk;

pub use countsketch::{CountSketch, SketchGeometry, SketchMode};
pub use data::SparseExample;
pub use error::{Error, Result};
pub use loss::{LossKind, LossSpec};
pub use topk::{Offer, TopKHeap};
