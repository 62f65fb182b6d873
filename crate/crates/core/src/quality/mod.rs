//! Quality control for generated samples: embedding similarity, NLI caption
//! consistency, threshold calibration, gating and semantic deduplication.

mod hypothesis;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{cosine, BackendError, EmbeddingBackend, NliBackend};
use crate::corpus::{CaptionRecord, QARecord, Record};

pub use hypothesis::render_hypothesis;

#[derive(Debug, Error, PartialEq)]
pub enum GateError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("need at least 2 calibration scores, got {0}")]
    InsufficientSamples(usize),
    #[error("no generated candidates to score")]
    EmptyCandidateSet,
    #[error("record `{0}` has no score for the gated task")]
    MissingScore(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
}

/// Scores attached to a generated record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<f64>,
}

/// The gated task: QA records gate on `s_q`, caption-derived records on
/// `s_cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Qa,
    Captioning,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Qa => "qa",
            Task::Captioning => "captioning",
        })
    }
}

impl Task {
    pub fn score_of(self, scores: &QualityScores) -> Option<f64> {
        match self {
            Task::Qa => scores.s_q,
            Task::Captioning => scores.s_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    FixedDefault,
    Calibrated,
}

/// Calibrated statistics for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub task: Task,
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
}

/// Gate values per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub tau_qa: f64,
    pub tau_cap: f64,
    #[serde(default)]
    pub mu: BTreeMap<Task, f64>,
    #[serde(default)]
    pub sigma: BTreeMap<Task, f64>,
    pub source: ThresholdSource,
}

/// z-value of the one-sided 97.5% bound used in calibration.
pub const CALIBRATION_Z: f64 = 1.96;
pub const DEFAULT_TAU_QA: f64 = 0.82;
pub const DEFAULT_TAU_CAP: f64 = 0.77;

impl ThresholdSet {
    /// Fixed gates: 0.82 for QA, 0.77 for captioning.
    pub fn fixed_default() -> Self {
        Self {
            tau_qa: DEFAULT_TAU_QA,
            tau_cap: DEFAULT_TAU_CAP,
            mu: BTreeMap::new(),
            sigma: BTreeMap::new(),
            source: ThresholdSource::FixedDefault,
        }
    }

    /// Defaults overridden by each calibrated entry. With no entries the
    /// result is the default set.
    pub fn calibrated(entries: &[ThresholdEntry]) -> Self {
        let mut set = Self::fixed_default();
        for e in entries {
            match e.task {
                Task::Qa => set.tau_qa = e.tau,
                Task::Captioning => set.tau_cap = e.tau,
            }
            set.mu.insert(e.task, e.mu);
            set.sigma.insert(e.task, e.sigma);
        }
        if !entries.is_empty() {
            set.source = ThresholdSource::Calibrated;
        }
        set
    }

    pub fn tau(&self, task: Task) -> f64 {
        match task {
            Task::Qa => self.tau_qa,
            Task::Captioning => self.tau_cap,
        }
    }

    /// Every calibrated task satisfies `tau == mu + 1.96 * sigma`.
    pub fn check(&self) -> Result<(), GateError> {
        if self.source != ThresholdSource::Calibrated {
            return Ok(());
        }
        for (task, mu) in &self.mu {
            let sigma = self.sigma.get(task).copied().unwrap_or(f64::NAN);
            if self.tau(*task) != mu + CALIBRATION_Z * sigma {
                return Err(GateError::InvalidThreshold(format!(
                    "{task}: tau != mu + 1.96 sigma"
                )));
            }
        }
        Ok(())
    }
}

/// `tau = mu + 1.96 sigma` with the arithmetic mean and the population
/// standard deviation of `scores`.
pub fn calibrate_threshold(scores: &[f64], task: Task) -> Result<ThresholdEntry, GateError> {
    if scores.len() < 2 {
        return Err(GateError::InsufficientSamples(scores.len()));
    }
    let n = scores.len() as f64;
    // Shifted by the first score so constant inputs give exactly zero spread.
    let x0 = scores[0];
    let mu = x0 + scores.iter().map(|s| s - x0).sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();
    Ok(ThresholdEntry {
        task,
        mu,
        sigma,
        tau: mu + CALIBRATION_Z * sigma,
    })
}

/// Cosine similarity of the two texts' embeddings.
pub fn semantic_similarity(
    orig: &str,
    generated: &str,
    embedder: &dyn EmbeddingBackend,
) -> Result<f64, BackendError> {
    let v = embedder.embed_batch(&[orig.to_string(), generated.to_string()])?;
    Ok(cosine(&v[0], &v[1]))
}

/// Highest cosine between `vector` and any pool vector; 0 for an empty pool.
pub fn max_pool_similarity(vector: &[f64], pool: &[Vec<f64>]) -> f64 {
    pool.iter()
        .map(|p| cosine(vector, p))
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
        .unwrap_or(0.0)
}

/// Mean entailment of each generated pair, rendered as a declarative
/// hypothesis, against the caption as premise.
pub fn caption_consistency(
    caption: &CaptionRecord,
    generated: &[QARecord],
    nli: &dyn NliBackend,
) -> Result<f64, GateError> {
    if generated.is_empty() {
        return Err(GateError::EmptyCandidateSet);
    }
    let pairs: Vec<(String, String)> = generated
        .iter()
        .map(|q| {
            let answer = q.answers.first().map(String::as_str).unwrap_or("");
            (caption.description.clone(), render_hypothesis(&q.question, answer))
        })
        .collect();
    let scores = nli.entailment_batch(&pairs)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Keep records at or above the gate (default) or at or below it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDirection {
    #[default]
    KeepAbove,
    KeepBelow,
}

/// Stable partition of `records` into (kept, rejected) by the task score.
pub fn gate(
    records: Vec<QARecord>,
    thresholds: &ThresholdSet,
    task: Task,
    direction: GateDirection,
) -> Result<(Vec<QARecord>, Vec<QARecord>), GateError> {
    let mut scored = Vec::with_capacity(records.len());
    for r in records {
        let s = r
            .scores
            .as_ref()
            .and_then(|s| task.score_of(s))
            .ok_or_else(|| GateError::MissingScore(r.id.clone()))?;
        scored.push((s, r));
    }
    let tau = thresholds.tau(task);
    let (kept, rejected): (Vec<_>, Vec<_>) = scored.into_iter().partition(|(s, _)| match direction {
        GateDirection::KeepAbove => *s >= tau,
        GateDirection::KeepBelow => *s <= tau,
    });
    Ok((
        kept.into_iter().map(|(_, r)| r).collect(),
        rejected.into_iter().map(|(_, r)| r).collect(),
    ))
}

/// A record dropped by dedup, with the earlier record it matched.
#[derive(Debug, Clone, PartialEq)]
pub struct Duplicate<R> {
    pub record: R,
    pub of: String,
    pub similarity: f64,
}

/// For each vector, `None` when it is kept or `Some((j, cos))` where `j` is
/// the earliest kept vector with cosine ≥ `theta`.
pub fn greedy_duplicates(vectors: &[Vec<f64>], theta: f64) -> Vec<Option<(usize, f64)>> {
    let mut kept: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        let hit = kept
            .par_iter()
            .map(|&j| (j, cosine(v, &vectors[j])))
            .find_first(|(_, c)| *c >= theta);
        if hit.is_none() {
            kept.push(i);
        }
        out.push(hit);
    }
    out
}

/// Greedy near-duplicate removal in input order; the earliest record wins.
pub fn semantic_dedup<R: Record>(
    records: Vec<R>,
    embedder: &dyn EmbeddingBackend,
    theta: f64,
) -> Result<(Vec<R>, Vec<Duplicate<R>>), GateError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(GateError::InvalidThreshold(format!(
            "dedup threshold must be in (0, 1], got {theta}"
        )));
    }
    let texts: Vec<String> = records.iter().map(|r| r.text().to_string()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let marks = greedy_duplicates(&vectors, theta);
    let ids: Vec<String> = records.iter().map(|r| r.id().to_string()).collect();
    let mut unique = Vec::new();
    let mut dups = Vec::new();
    for (r, m) in records.into_iter().zip(marks) {
        match m {
            None => unique.push(r),
            Some((j, similarity)) => dups.push(Duplicate {
                record: r,
                of: ids[j].clone(),
                similarity,
            }),
        }
    }
    Ok((unique, dups))
}

/// Why a generated record did not make it into the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BelowThreshold,
    AboveThreshold,
    LowRelevance,
    Duplicate,
}

/// One line of `rejected.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRecord {
    pub reason: RejectReason,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub record: QARecord,
}
