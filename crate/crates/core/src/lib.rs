//! Perturbation-robust CLIP-style caption scoring.
//!
//! The crate covers the whole pipeline at desk scale: deterministic lexical
//! perturbations of captions ([`textproc`]), a small trainable text encoder
//! and embedding storage ([`embedcore`]), the contrastive and robustness
//! objectives with exact gradients ([`losses`]), AdamW training loops
//! ([`trainer`]), the `w * max(0, cos)` score ([`metric`]) and score-drop /
//! correlation statistics ([`evalstats`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the 64-bit precision used for training.

pub mod embedcore;
pub mod error;
pub mod evalstats;
pub mod losses;
pub mod metric;
pub mod scalar;
pub mod textproc;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Text encoder in training precision.
pub type Encoder = embedcore::EncoderParams<f64>;
/// Triplet batch in training precision.
pub type Batch = losses::TripletBatch<f64>;
/// AdamW state in training precision.
pub type Optimizer = trainer::OptimizerState<f64>;
pub type Ratings = evalstats::RatingPairs<f64>;
pub type Breakdown = losses::LossBreakdown<f64>;
