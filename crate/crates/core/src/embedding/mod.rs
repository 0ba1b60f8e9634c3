//! Text embeddings and cosine similarity.
//!
//! The default provider is [`HashingEncoder`], a signed feature-hashing
//! encoder over word tokens and character trigrams. It needs no model weights
//! and is bit-exact across runs and platforms. [`RemoteProvider`] talks to an
//! HTTP embedding service for real sentence-encoder vectors.

mod cache;
mod hashing;
mod remote;

pub use cache::{EmbeddingCache, CACHE_MAGIC};
pub use hashing::{
    deterministic_ln, embed, fnv1a64, hash_feature, tokenize, EncoderConfig, HashingEncoder, TfWeighting,
    FNV_OFFSET_BASIS, FNV_PRIME,
};
pub use remote::{EmbedRequest, EmbedResponse, RemoteConfig, RemoteProvider};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-dimension embedding. Either unit norm or the all-zero sentinel
/// produced for text without features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector { values: vec![0.0; dim] }
    }

    /// L2-normalize `values`. Non-finite input or a zero vector yields the
    /// sentinel.
    pub fn normalized(values: &[f64]) -> Self {
        if values.iter().any(|v| !v.is_finite()) {
            return Self::zeros(values.len());
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::zeros(values.len());
        }
        EmbeddingVector { values: values.iter().map(|v| (v / norm) as f32).collect() }
    }

    /// Wrap raw values without normalizing. Used when decoding the cache.
    pub fn from_raw(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_sentinel(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt()
    }
}

/// Cosine similarity in `[-1, 1]`; 0 when either side is the sentinel.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.is_sentinel() || b.is_sentinel() {
        return Ok(0.0);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum();
    Ok((dot / (a.norm() * b.norm())).clamp(-1.0, 1.0))
}

/// Anything that turns texts into embeddings.
///
/// Implementations return exactly one vector per input, in input order, all
/// of dimension [`EmbeddingProvider::dim`], unit-normalized (or sentinel).
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop().ok_or_else(|| EmbedError::MalformedResponse("provider returned nothing".into()))
    }
}
