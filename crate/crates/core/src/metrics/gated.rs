use serde::{Deserialize, Serialize};

use super::{bleu, check_aligned, cider, iou3d, meteor, rouge, Candidate, MetricError, ReferenceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Bleu(usize),
    RougeL,
    Meteor,
    Cider,
}

/// `true` where the predicted box overlaps the ground-truth box with IoU at
/// least `k`. Every item on both sides needs a box.
pub(crate) fn iou_mask(cands: &[Candidate], refs: &[ReferenceSet], k: f64) -> Result<Vec<bool>, MetricError> {
    check_aligned(cands, refs)?;
    cands
        .iter()
        .zip(refs)
        .map(|(c, r)| {
            let cb = c.bbox.as_ref().ok_or_else(|| MetricError::MissingBox(c.id.clone()))?;
            let rb = r.bbox.as_ref().ok_or_else(|| MetricError::MissingBox(r.id.clone()))?;
            Ok(iou3d(cb, rb) >= k)
        })
        .collect()
}

/// `metric@k`: items whose box misses the IoU threshold score zero while
/// still counting in the denominator.
pub fn gated_metric(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    k: f64,
    kind: MetricKind,
) -> Result<f64, MetricError> {
    let mask = iou_mask(cands, refs, k)?;
    let mask = Some(mask.as_slice());
    match kind {
        MetricKind::Bleu(n) => bleu::bleu_masked(cands, refs, n, mask),
        MetricKind::RougeL => rouge::rouge_l_masked(cands, refs, mask),
        MetricKind::Meteor => meteor::meteor_masked(cands, refs, mask),
        MetricKind::Cider => cider::cider_masked(cands, refs, mask),
    }
}
