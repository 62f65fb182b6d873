use std::collections::{HashMap, HashSet};

use super::ngram::{ngrams, NgramCounts};
use super::{check_aligned, masked_mean, Candidate, MetricError, ReferenceSet};

/// Width of the Gaussian length penalty.
pub const CIDER_SIGMA: f64 = 6.0;
const MAX_N: usize = 4;

struct Weighted<'a> {
    vecs: Vec<HashMap<&'a [String], f64>>,
    norms: Vec<f64>,
    len: usize,
}

fn weigh<'a>(tokens: &'a [String], df: &HashMap<&[String], usize>, log_n: f64) -> Weighted<'a> {
    let mut vecs = Vec::with_capacity(MAX_N);
    let mut norms = Vec::with_capacity(MAX_N);
    for n in 1..=MAX_N {
        let counts: NgramCounts<'a> = ngrams(tokens, n);
        let v: HashMap<&[String], f64> = counts
            .into_iter()
            .map(|(g, tf)| {
                let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
                (g, tf as f64 * (log_n - d.ln()))
            })
            .collect();
        norms.push(v.values().map(|x| x * x).sum::<f64>().sqrt());
        vecs.push(v);
    }
    Weighted {
        vecs,
        norms,
        len: tokens.len(),
    }
}

fn similarity(h: &Weighted, r: &Weighted) -> [f64; MAX_N] {
    let delta = h.len as f64 - r.len as f64;
    let length = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
    std::array::from_fn(|n| {
        let mut val: f64 = h.vecs[n]
            .iter()
            .map(|(g, hv)| r.vecs[n].get(g).map_or(0.0, |rv| hv.min(*rv) * rv))
            .sum();
        if h.norms[n] != 0.0 && r.norms[n] != 0.0 {
            val /= h.norms[n] * r.norms[n];
        }
        val * length
    })
}

/// Per-item CIDEr-D scores. Document frequencies are taken over the whole
/// reference corpus: an n-gram counts once per item if any of its
/// references contains it.
pub(crate) fn cider_items(cands: &[Candidate], refs: &[ReferenceSet]) -> Result<Vec<f64>, MetricError> {
    check_aligned(cands, refs)?;
    if refs.len() < 2 {
        return Err(MetricError::CorpusTooSmall(refs.len()));
    }
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for r in refs {
        let mut seen: HashSet<&[String]> = HashSet::new();
        for reference in &r.references {
            for n in 1..=MAX_N {
                seen.extend(ngrams(reference, n).into_keys());
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let log_n = (refs.len() as f64).ln();
    Ok(cands
        .iter()
        .zip(refs)
        .map(|(c, r)| {
            let h = weigh(&c.tokens, &df, log_n);
            let mut acc = [0.0; MAX_N];
            for reference in &r.references {
                let w = weigh(reference, &df, log_n);
                for (a, s) in acc.iter_mut().zip(similarity(&h, &w)) {
                    *a += s;
                }
            }
            let mean_n = acc.iter().sum::<f64>() / MAX_N as f64;
            10.0 * mean_n / r.references.len() as f64
        })
        .collect())
}

/// Corpus CIDEr-D (×10 convention) with clipped tf-idf similarity and a
/// Gaussian penalty on the candidate/reference length difference.
pub fn cider(cands: &[Candidate], refs: &[ReferenceSet]) -> Result<f64, MetricError> {
    cider_masked(cands, refs, None)
}

pub(crate) fn cider_masked(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    mask: Option<&[bool]>,
) -> Result<f64, MetricError> {
    let items = cider_items(cands, refs)?;
    Ok(masked_mean(items.into_iter(), mask, cands.len()))
}
