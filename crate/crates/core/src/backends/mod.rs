//! Pluggable model backends for embeddings, entailment and QA generation.
//!
//! Every backend carries a name and a version so that scores written into a
//! manifest can be attributed. The [`reference`] implementations are
//! deterministic and offline; [`http`] reaches external model services.

pub mod http;
pub mod reference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{
    http_embed, http_generate, EndpointConfig, HttpEmbedder, HttpGenerator, HttpNli, HttpStats, RetryPolicy,
};
pub use reference::{
    reference_embed, reference_nli, token_bucket, ReferenceEmbedder, ReferenceGenerator,
    ReferenceNli,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

/// Maps text to a fixed-dimension real vector.
pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn dimension(&self) -> usize;

    /// One vector per input text, index-aligned.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| BackendError::Protocol("empty embedding response".into()))
    }
}

/// Scores how strongly a premise entails a hypothesis, in `[0, 1]`.
pub trait NliBackend: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;

    fn entailment_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, BackendError>;

    fn entailment(&self, premise: &str, hypothesis: &str) -> Result<f64, BackendError> {
        let mut out = self.entailment_batch(&[(premise.to_string(), hypothesis.to_string())])?;
        out.pop()
            .ok_or_else(|| BackendError::Protocol("empty entailment response".into()))
    }
}

/// A scene-to-QA generation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub scene_id: String,
    pub context: String,
    pub template: String,
    pub k: usize,
}

/// A question/answer candidate as returned by a generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaCandidate {
    pub q: String,
    pub a: String,
}

impl QaCandidate {
    pub fn new(q: impl Into<String>, a: impl Into<String>) -> Self {
        Self {
            q: q.into(),
            a: a.into(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        !self.q.trim().is_empty() && !self.a.trim().is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub candidates: Vec<QaCandidate>,
    /// Candidates the backend client already discarded as malformed.
    pub dropped: usize,
}

/// Produces question/answer pairs for a scene.
pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn max_candidates(&self) -> usize;
    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError>;
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}
