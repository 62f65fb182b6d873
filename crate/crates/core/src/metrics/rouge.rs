use super::{check_aligned, masked_mean, Candidate, MetricError, ReferenceSet};

pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure of one candidate, maximized over its references.
pub fn rouge_l_sentence(cand: &[String], references: &[Vec<String>]) -> f64 {
    references
        .iter()
        .map(|r| {
            let lcs = lcs_len(cand, r);
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / cand.len() as f64;
            let rec = lcs as f64 / r.len() as f64;
            let b2 = ROUGE_BETA * ROUGE_BETA;
            ((1.0 + b2) * p * rec) / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

/// Mean sentence ROUGE-L over the corpus.
pub fn rouge_l(cands: &[Candidate], refs: &[ReferenceSet]) -> Result<f64, MetricError> {
    rouge_l_masked(cands, refs, None)
}

pub(crate) fn rouge_l_masked(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    mask: Option<&[bool]>,
) -> Result<f64, MetricError> {
    check_aligned(cands, refs)?;
    let scores = cands
        .iter()
        .zip(refs)
        .map(|(c, r)| rouge_l_sentence(&c.tokens, &r.references));
    Ok(masked_mean(scores, mask, cands.len()))
}
