use super::{check_aligned, masked_mean, Candidate, MetricError, ReferenceSet};
use crate::text::stem;

const ALPHA: f64 = 0.9;
const GAMMA: f64 = 0.5;
const BETA: f64 = 3.0;

/// Unigram alignment between a candidate and one reference: `(cand_idx,
/// ref_idx)` pairs sorted by candidate position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    /// Runs of pairs contiguous in both the candidate and the reference.
    pub fn chunks(&self) -> usize {
        if self.pairs.is_empty() {
            return 0;
        }
        1 + self
            .pairs
            .windows(2)
            .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
            .count()
    }
}

/// Two-stage alignment: exact matches first, then stem matches over the
/// still-unmatched tokens. Each stage scans the candidate left to right and
/// takes the earliest unmatched reference token that matches.
pub fn meteor_alignment(cand: &[String], reference: &[String]) -> Alignment {
    let mut cand_used = vec![false; cand.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let cand_stems: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    for stage in 0..2 {
        for (i, c) in cand.iter().enumerate() {
            if cand_used[i] {
                continue;
            }
            let hit = (0..reference.len()).find(|&j| {
                !ref_used[j]
                    && if stage == 0 {
                        reference[j] == *c
                    } else {
                        ref_stems[j] == cand_stems[i]
                    }
            });
            if let Some(j) = hit {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    Alignment { pairs }
}

fn score_against(cand: &[String], reference: &[String]) -> f64 {
    let al = meteor_alignment(cand, reference);
    let m = al.matches();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let frag = al.chunks() as f64 / m as f64;
    let penalty = GAMMA * frag.powf(BETA);
    f_mean * (1.0 - penalty)
}

/// Sentence METEOR, maximized over references.
pub fn meteor_sentence(cand: &[String], references: &[Vec<String>]) -> f64 {
    references
        .iter()
        .map(|r| score_against(cand, r))
        .fold(0.0, f64::max)
}

/// Mean sentence METEOR over the corpus.
pub fn meteor(cands: &[Candidate], refs: &[ReferenceSet]) -> Result<f64, MetricError> {
    meteor_masked(cands, refs, None)
}

pub(crate) fn meteor_masked(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    mask: Option<&[bool]>,
) -> Result<f64, MetricError> {
    check_aligned(cands, refs)?;
    let scores = cands
        .iter()
        .zip(refs)
        .map(|(c, r)| meteor_sentence(&c.tokens, &r.references));
    Ok(masked_mean(scores, mask, cands.len()))
}
