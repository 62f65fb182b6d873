//! Corpus-level captioning metrics: BLEU-1..4, ROUGE-L, METEOR (exact and
//! stem stages), CIDEr-D, axis-aligned 3D IoU and IoU-gated variants.
//!
//! All scores are on their natural scale (BLEU/ROUGE-L/METEOR in `[0, 1]`,
//! CIDEr with the conventional ×10 factor). Reports multiply by 100 only
//! for presentation.

mod bleu;
mod cider;
mod gated;
mod iou;
mod meteor;
mod ngram;
mod rouge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::bleu;
pub use cider::{cider, CIDER_SIGMA};
pub use gated::{gated_metric, MetricKind};
pub use iou::{iou3d, Box3D};
pub use meteor::{meteor, meteor_alignment, meteor_sentence, Alignment};
pub use rouge::{lcs_len, rouge_l, rouge_l_sentence, ROUGE_BETA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("candidate and reference corpora are not aligned: {0}")]
    MisalignedCorpus(String),
    #[error("CIDEr needs at least 2 reference sets, got {0}")]
    CorpusTooSmall(usize),
    #[error("item `{0}` has no box")]
    MissingBox(String),
    #[error("BLEU order must be in 1..=4, got {0}")]
    InvalidOrder(usize),
}

/// A tokenized system output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Box3D>,
}

/// Tokenized ground-truth references for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub id: String,
    pub references: Vec<Vec<String>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Box3D>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            id: id.into(),
            tokens,
            bbox: None,
        }
    }
}

impl ReferenceSet {
    pub fn new(id: impl Into<String>, references: Vec<Vec<String>>) -> Self {
        Self {
            id: id.into(),
            references,
            bbox: None,
        }
    }
}

/// Candidates and references must pair up one-to-one by position and id,
/// with at least one reference per item.
pub(crate) fn check_aligned(cands: &[Candidate], refs: &[ReferenceSet]) -> Result<(), MetricError> {
    if cands.len() != refs.len() {
        return Err(MetricError::MisalignedCorpus(format!(
            "{} candidates vs {} reference sets",
            cands.len(),
            refs.len()
        )));
    }
    for (c, r) in cands.iter().zip(refs) {
        if c.id != r.id {
            return Err(MetricError::MisalignedCorpus(format!(
                "candidate `{}` paired with references `{}`",
                c.id, r.id
            )));
        }
        if r.references.is_empty() {
            return Err(MetricError::MisalignedCorpus(format!(
                "item `{}` has no references",
                r.id
            )));
        }
    }
    Ok(())
}

/// Mean of per-item scores with masked-out items counted as zero.
pub(crate) fn masked_mean(scores: impl Iterator<Item = f64>, mask: Option<&[bool]>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let total: f64 = scores
        .enumerate()
        .map(|(i, s)| if mask.is_none_or(|m| m[i]) { s } else { 0.0 })
        .sum();
    total / n as f64
}

/// One set of metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
}

impl MetricValues {
    /// Values ×100 as reported in captioning tables.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bleu: self.bleu.map(|b| b * factor),
            rouge_l: self.rouge_l * factor,
            meteor: self.meteor * factor,
            cider: self.cider * factor,
        }
    }
}

/// IoU-gated values at threshold `iou`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedValues {
    pub iou: f64,
    #[serde(flatten)]
    pub values: MetricValues,
    /// Items whose box reached the threshold.
    pub passing: usize,
    /// Denominator of the gated average (all ground-truth items).
    pub denominator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub values: MetricValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gated: Option<GatedValues>,
}

fn all_metrics(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    mask: Option<&[bool]>,
) -> Result<MetricValues, MetricError> {
    let mut b = [0.0; 4];
    for (n, slot) in b.iter_mut().enumerate() {
        *slot = bleu::bleu_masked(cands, refs, n + 1, mask)?;
    }
    Ok(MetricValues {
        bleu: b,
        rouge_l: rouge::rouge_l_masked(cands, refs, mask)?,
        meteor: meteor::meteor_masked(cands, refs, mask)?,
        cider: cider::cider_masked(cands, refs, mask)?,
    })
}

/// Every metric over the corpus; when `iou_threshold` is given and every
/// item carries boxes, also the gated variants.
pub fn evaluate(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    iou_threshold: Option<f64>,
) -> Result<MetricReport, MetricError> {
    let values = all_metrics(cands, refs, None)?;
    let boxed = cands.iter().all(|c| c.bbox.is_some()) && refs.iter().all(|r| r.bbox.is_some());
    let gated = match iou_threshold {
        Some(k) if boxed && !cands.is_empty() => {
            let mask = gated::iou_mask(cands, refs, k)?;
            Some(GatedValues {
                iou: k,
                values: all_metrics(cands, refs, Some(&mask))?,
                passing: mask.iter().filter(|m| **m).count(),
                denominator: refs.len(),
            })
        }
        _ => None,
    };
    Ok(MetricReport { values, gated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn misaligned_ids() {
        let c = vec![Candidate::new("a", toks("x y"))];
        let r = vec![ReferenceSet::new("b", vec![toks("x y")])];
        assert!(matches!(bleu(&c, &r, 1), Err(MetricError::MisalignedCorpus(_))));
        assert!(matches!(rouge_l(&c, &r), Err(MetricError::MisalignedCorpus(_))));
        assert!(matches!(meteor(&c[..0], &r), Err(MetricError::MisalignedCorpus(_))));
    }

    #[test]
    fn report_gated_only_with_boxes() {
        let mut c = vec![
            Candidate::new("a", toks("a red chair by the desk")),
            Candidate::new("b", toks("a white lamp on the table")),
        ];
        let mut r = vec![
            ReferenceSet::new("a", vec![toks("a red chair by the desk")]),
            ReferenceSet::new("b", vec![toks("a white lamp on the table")]),
        ];
        let rep = evaluate(&c, &r, Some(0.5)).unwrap();
        assert!(rep.gated.is_none());
        for (ci, ri) in c.iter_mut().zip(r.iter_mut()) {
            ci.bbox = Some(Box3D::new([0.0; 3], [1.0; 3]));
            ri.bbox = Some(Box3D::new([0.0; 3], [1.0; 3]));
        }
        let rep = evaluate(&c, &r, Some(0.5)).unwrap();
        let g = rep.gated.unwrap();
        assert_eq!(g.values, rep.values);
        assert_eq!(g.passing, 2);
        assert_eq!(rep.values.bleu, [1.0; 4]);
        assert!((rep.values.cider - 10.0).abs() < 1e-9);
    }
}
