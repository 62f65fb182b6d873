use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{evaluate, Box3D, Candidate, MetricError, MetricValues, ReferenceSet};
use crate::text::tokenize;

use super::{read_jsonl, PipelineError};

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub text: String,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Box3D>,
}

/// One line of `references.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub id: String,
    pub references: Vec<String>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Box3D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub cider: f64,
}

impl From<&MetricValues> for ScoreBlock {
    fn from(v: &MetricValues) -> Self {
        Self {
            bleu_1: v.bleu[0],
            bleu_2: v.bleu[1],
            bleu_3: v.bleu[2],
            bleu_4: v.bleu[3],
            rouge_l: v.rouge_l,
            meteor: v.meteor,
            cider: v.cider,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedBlock {
    pub iou: f64,
    pub passing: usize,
    pub denominator: usize,
    pub scores: ScoreBlock,
    pub raw: ScoreBlock,
}

/// Contents of `metrics.json`: table values (×100) next to raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub items: usize,
    pub scale: f64,
    pub scores: ScoreBlock,
    pub raw: ScoreBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gated: Option<GatedBlock>,
}

pub const PRESENTATION_SCALE: f64 = 100.0;

/// Pairs predictions with ground truth by id, in ground-truth order.
pub fn align(preds: Vec<Prediction>, truth: Vec<GroundTruth>) -> Result<(Vec<Candidate>, Vec<ReferenceSet>), MetricError> {
    let n_preds = preds.len();
    let mut by_id: HashMap<String, Prediction> = HashMap::with_capacity(n_preds);
    for p in preds {
        if by_id.contains_key(&p.id) {
            return Err(MetricError::MisalignedCorpus(format!("duplicate prediction `{}`", p.id)));
        }
        by_id.insert(p.id.clone(), p);
    }
    if n_preds != truth.len() {
        return Err(MetricError::MisalignedCorpus(format!(
            "{n_preds} predictions vs {} reference sets",
            truth.len()
        )));
    }
    let mut cands = Vec::with_capacity(truth.len());
    let mut refs = Vec::with_capacity(truth.len());
    for t in truth {
        let p = by_id
            .remove(&t.id)
            .ok_or_else(|| MetricError::MisalignedCorpus(format!("no prediction for `{}`", t.id)))?;
        cands.push(Candidate {
            id: p.id,
            tokens: tokenize(&p.text),
            bbox: p.bbox,
        });
        refs.push(ReferenceSet {
            id: t.id,
            references: t.references.iter().map(|r| tokenize(r)).collect(),
            bbox: t.bbox,
        });
    }
    Ok((cands, refs))
}

/// Scores a prediction file against a reference file.
pub fn evaluate_files(
    predictions: &Path,
    references: &Path,
    iou_threshold: Option<f64>,
) -> Result<MetricsFile, PipelineError> {
    let stage = "evaluate";
    let preds: Vec<Prediction> = read_jsonl(predictions).map_err(|e| e.at(stage))?;
    let truth: Vec<GroundTruth> = read_jsonl(references).map_err(|e| e.at(stage))?;
    let (cands, refs) = align(preds, truth).map_err(|e| PipelineError::stage(stage, e))?;
    if iou_threshold.is_some() {
        if let Some(c) = cands.iter().find(|c| c.bbox.is_none()) {
            return Err(PipelineError::stage(stage, MetricError::MissingBox(c.id.clone())));
        }
        if let Some(r) = refs.iter().find(|r| r.bbox.is_none()) {
            return Err(PipelineError::stage(stage, MetricError::MissingBox(r.id.clone())));
        }
    }
    let report = evaluate(&cands, &refs, iou_threshold).map_err(|e| PipelineError::stage(stage, e))?;
    Ok(MetricsFile {
        items: cands.len(),
        scale: PRESENTATION_SCALE,
        scores: (&report.values.scaled(PRESENTATION_SCALE)).into(),
        raw: (&report.values).into(),
        gated: report.gated.map(|g| GatedBlock {
            iou: g.iou,
            passing: g.passing,
            denominator: g.denominator,
            scores: (&g.values.scaled(PRESENTATION_SCALE)).into(),
            raw: (&g.values).into(),
        }),
    })
}
