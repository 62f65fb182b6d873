//! Answer/question relevance: `sigmoid(w · [embed(a); embed(q)] + bias)`,
//! plus a logistic-regression fit of `w` and `bias` from a QA corpus.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::backends::EmbeddingBackend;
use crate::corpus::QARecord;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    /// Length `2d`: answer half first, question half second.
    pub w: Vec<f64>,
    pub bias: f64,
}

impl RelevanceWeights {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            w: vec![0.0; 2 * dimension],
            bias: 0.0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AugmentError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| AugmentError::InvalidParameter(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), AugmentError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| AugmentError::InvalidParameter(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| AugmentError::io(path, e))
    }

    fn check(&self, dimension: usize) -> Result<(), AugmentError> {
        if self.w.len() != 2 * dimension {
            return Err(AugmentError::DimensionMismatch {
                expected: 2 * dimension,
                found: self.w.len(),
            });
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(answer: &[f64], question: &[f64], weights: &RelevanceWeights) -> f64 {
    let (wa, wq) = weights.w.split_at(answer.len());
    let dot: f64 = wa.iter().zip(answer).map(|(w, x)| w * x).sum::<f64>()
        + wq.iter().zip(question).map(|(w, x)| w * x).sum::<f64>();
    dot + weights.bias
}

/// Relevance from precomputed embeddings of the answer and the question.
pub fn relevance_from_embeddings(
    answer: &[f64],
    question: &[f64],
    weights: &RelevanceWeights,
) -> Result<f64, AugmentError> {
    if answer.len() != question.len() {
        return Err(AugmentError::DimensionMismatch {
            expected: answer.len(),
            found: question.len(),
        });
    }
    weights.check(answer.len())?;
    Ok(sigmoid(logit(answer, question, weights)))
}

pub fn relevance(
    answer: &str,
    question: &str,
    weights: &RelevanceWeights,
    embedder: &dyn EmbeddingBackend,
) -> Result<f64, AugmentError> {
    weights.check(embedder.dimension())?;
    let v = embedder.embed_batch(&[answer.to_string(), question.to_string()])?;
    relevance_from_embeddings(&v[0], &v[1], weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Fits relevance weights by full-batch logistic regression. Each record's
/// own (first answer, question) is a positive; the answer of another record,
/// paired through a seeded shuffle, is a negative when the texts differ.
pub fn fit_relevance(
    records: &[QARecord],
    embedder: &dyn EmbeddingBackend,
    opts: &FitOptions,
) -> Result<RelevanceWeights, AugmentError> {
    let d = embedder.dimension();
    let answers: Vec<String> = records.iter().map(|r| r.answers[0].clone()).collect();
    let questions: Vec<String> = records.iter().map(|r| r.question.clone()).collect();
    let ea = embedder.embed_batch(&answers)?;
    let eq = embedder.embed_batch(&questions)?;

    let mut perm: Vec<usize> = (0..records.len()).collect();
    perm.shuffle(&mut stream_rng(opts.seed, "fit_relevance", "negatives"));
    let mut samples: Vec<(usize, usize, f64)> = (0..records.len()).map(|i| (i, i, 1.0)).collect();
    samples.extend(
        perm.iter()
            .enumerate()
            .filter(|(i, j)| answers[**j].trim() != answers[*i].trim())
            .map(|(i, j)| (*j, i, 0.0)),
    );
    let negatives = samples.iter().filter(|s| s.2 == 0.0).count();
    if records.is_empty() || negatives == 0 {
        return Err(AugmentError::InvalidParameter(
            "relevance fit needs at least two records with different answers".into(),
        ));
    }

    let mut weights = RelevanceWeights::zeros(d);
    let n = samples.len() as f64;
    let mut grad = vec![0.0; 2 * d];
    for _ in 0..opts.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for &(a, q, y) in &samples {
            let err = sigmoid(logit(&ea[a], &eq[q], &weights)) - y;
            for (g, x) in grad[..d].iter_mut().zip(&ea[a]) {
                *g += err * x;
            }
            for (g, x) in grad[d..].iter_mut().zip(&eq[q]) {
                *g += err * x;
            }
            grad_b += err;
        }
        for (w, g) in weights.w.iter_mut().zip(&grad) {
            *w -= opts.learning_rate * (g / n + opts.l2 * *w);
        }
        weights.bias -= opts.learning_rate * grad_b / n;
    }
    Ok(weights)
}
