//! Embedding storage, cosine geometry and the trainable text encoder.

mod encoder;
mod geometry;
mod matrix;

pub use encoder::{
    encode_text, fnv1a64, hash_token, EncodeTrace, EncoderParams, EncoderShape, ParamBlock,
    DEFAULT_GATE_GAIN, INIT_RANGE, INIT_TEMP_LOGIT, MAX_TEMP_LOGIT, PRMP_MAGIC, PRMP_VERSION,
};
pub(crate) use geometry::{check_dims, cosine_unchecked, cosine_with_grad};
pub use geometry::{cosine, dot, norm, normalize, NORM_FLOOR};
pub use matrix::{manifest_path, EmbeddingMatrix, ManifestEntry, PRMC_MAGIC, PRMC_VERSION};

/// Score weight `w` of the metric.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricConfig {
    pub w: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { w: 2.5 }
    }
}
