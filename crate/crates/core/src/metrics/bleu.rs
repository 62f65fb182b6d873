use super::ngram::ngrams;
use super::{check_aligned, Candidate, MetricError, ReferenceSet};

/// Corpus BLEU-`n`: geometric mean of clipped n-gram precisions for orders
/// `1..=n` times the brevity penalty. Any zero precision gives 0.
pub fn bleu(cands: &[Candidate], refs: &[ReferenceSet], n: usize) -> Result<f64, MetricError> {
    bleu_masked(cands, refs, n, None)
}

/// Masked-out items keep their lengths and n-gram totals but contribute no
/// matches.
pub(crate) fn bleu_masked(
    cands: &[Candidate],
    refs: &[ReferenceSet],
    n: usize,
    mask: Option<&[bool]>,
) -> Result<f64, MetricError> {
    if !(1..=4).contains(&n) {
        return Err(MetricError::InvalidOrder(n));
    }
    check_aligned(cands, refs)?;
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (i, (c, r)) in cands.iter().zip(refs).enumerate() {
        let credited = mask.is_none_or(|m| m[i]);
        cand_len += c.tokens.len();
        ref_len += closest_ref_len(c.tokens.len(), &r.references);
        for order in 1..=n {
            let counts = ngrams(&c.tokens, order);
            total[order - 1] += counts.values().sum::<usize>();
            if !credited {
                continue;
            }
            let ref_counts: Vec<_> = r.references.iter().map(|x| ngrams(x, order)).collect();
            for (gram, count) in &counts {
                let max_ref = ref_counts
                    .iter()
                    .map(|rc| rc.get(gram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                matched[order - 1] += (*count).min(max_ref);
            }
        }
    }
    if cand_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for (m, t) in matched.iter().zip(&total) {
        if *m == 0 || *t == 0 {
            return Ok(0.0);
        }
        log_sum += (*m as f64 / *t as f64).ln();
    }
    let bp = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * (log_sum / n as f64).exp())
}

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len(c: usize, references: &[Vec<String>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(c), l))
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn corpus(pairs: &[(&str, &[&str])]) -> (Vec<Candidate>, Vec<ReferenceSet>) {
        pairs
            .iter()
            .enumerate()
            .map(|(i, (c, rs))| {
                (
                    Candidate::new(i.to_string(), toks(c)),
                    ReferenceSet::new(i.to_string(), rs.iter().map(|r| toks(r)).collect()),
                )
            })
            .unzip()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let (c, r) = corpus(&[
            ("the chair is next to the desk", &["the chair is next to the desk"]),
            ("a white lamp on a small table", &["a white lamp on a small table"]),
        ]);
        for n in 1..=4 {
            assert!((bleu(&c, &r, n).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_unigram_precision() {
        let (c, r) = corpus(&[("the the the the", &["the cat sat down"])]);
        assert!((bleu(&c, &r, 1).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn no_overlap_is_zero() {
        let (c, r) = corpus(&[("red chair", &["blue table"])]);
        assert_eq!(bleu(&c, &r, 1).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty() {
        let (c, r) = corpus(&[("the cat", &["the cat sat down"])]);
        let expected = (1.0f64 - 4.0 / 2.0).exp();
        assert!((bleu(&c, &r, 1).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn closest_reference_tie_prefers_shorter() {
        assert_eq!(closest_ref_len(3, &[toks("a b"), toks("a b c d")]), 2);
        assert_eq!(closest_ref_len(3, &[toks("a b c d e"), toks("a b c d")]), 4);
    }

    #[test]
    fn order_bounds() {
        let (c, r) = corpus(&[("a", &["a"])]);
        assert_eq!(bleu(&c, &r, 0), Err(MetricError::InvalidOrder(0)));
        assert_eq!(bleu(&c, &r, 5), Err(MetricError::InvalidOrder(5)));
    }
}
