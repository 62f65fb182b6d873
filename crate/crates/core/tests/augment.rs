mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use sdf_core::augment::{
    augment_qa_record, caption_to_qa, default_templates, fit_relevance, logical_reverse, parse_caption,
    relevance_from_embeddings, synonym_replace, FitOptions, Lexicons, QaTransformOptions, RelevanceWeights,
    Thesaurus,
};
use sdf_core::backends::{EmbeddingBackend, ReferenceEmbedder};
use sdf_core::corpus::{Provenance, QARecord};
use sdf_core::text::tokenize;

fn counts(text: &str) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for t in tokenize(text) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// Every synonym, reversal and shuffle variant from enough synthetic records
/// to reach `n` variants.
fn variants(n: usize) -> Vec<(QARecord, QARecord)> {
    let syn = Thesaurus::default_synonyms();
    let ant = Thesaurus::default_antonyms();
    let opts = QaTransformOptions::default();
    let mut out = Vec::new();
    for seed in 0.. {
        for q in common::qa(seed, 100, 10) {
            for v in augment_qa_record(&q, &syn, &ant, &opts, seed) {
                out.push((q.clone(), v));
            }
        }
        if out.len() >= n {
            return out;
        }
    }
    unreachable!()
}

#[test]
fn five_hundred_variants_are_well_formed() {
    let vs = variants(500);
    assert!(vs.len() >= 500);
    for (orig, v) in &vs {
        assert_eq!(v.provenance, Provenance::QaGen);
        assert!(!v.question.trim().is_empty());
        assert!(v.answers.iter().all(|a| !a.trim().is_empty()));
        assert_eq!(v.scene_id, orig.scene_id);
        assert!(v.id.starts_with(&format!("qa_gen-{}-", orig.id)), "{}", v.id);
    }
}

#[test]
fn synonym_replace_preserves_answers() {
    let syn = Thesaurus::default_synonyms();
    let mut checked = 0;
    for seed in 0..10 {
        for q in common::qa(seed, 100, 10) {
            for v in synonym_replace(&q, &syn, seed, 2, 3) {
                checked += 1;
                assert_eq!(v.answers, q.answers);
                assert_ne!(v.question, q.question);
                let (before, after) = (counts(&q.question), counts(&v.question));
                for a in &q.answers {
                    for t in tokenize(a) {
                        let n = before.get(&t).copied().unwrap_or(0);
                        assert!(after.get(&t).copied().unwrap_or(0) >= n, "`{t}` lost: {} -> {}", q.question, v.question);
                    }
                }
            }
        }
    }
    assert!(checked >= 500, "{checked}");
}

#[test]
fn logical_reverse_is_an_involution() {
    let ant = Thesaurus::default_antonyms();
    let mut applicable = 0;
    for seed in 0..20 {
        for q in common::qa(seed, 100, 10) {
            let Some(r) = logical_reverse(&q, &ant) else { continue };
            applicable += 1;
            assert_ne!(r.answers, q.answers);
            let back = logical_reverse(&r, &ant).expect("reverse of a reversal applies");
            assert_eq!((back.question.as_str(), &back.answers), (q.question.as_str(), &q.answers));
        }
    }
    assert!(applicable >= 50, "{applicable}");
}

#[test]
fn caption_templates_leave_no_slots() {
    let templates = default_templates();
    let lex = Lexicons::default();
    let slot = regex::Regex::new(r"\{[a-z_]+\}").unwrap();
    let mut emitted = 0;
    for seed in 0..5 {
        for c in common::captions(seed, 100, 10) {
            let out = caption_to_qa(&c, &templates, &parse_caption(&c, &lex));
            assert!(out.len() <= templates.len());
            for q in &out {
                emitted += 1;
                assert!(!slot.is_match(&q.question), "{}", q.question);
                assert!(q.answers.iter().all(|a| !a.is_empty() && !slot.is_match(a)));
                assert_eq!(q.provenance, Provenance::CaptionGen);
            }
        }
    }
    assert!(emitted >= 500, "{emitted}");
}

#[test]
fn augmentation_is_deterministic_and_order_independent() {
    let syn = Thesaurus::default_synonyms();
    let ant = Thesaurus::default_antonyms();
    let opts = QaTransformOptions::default();
    let qs = common::qa(4, 200, 10);
    let run = |qs: &[QARecord]| -> Vec<String> {
        qs.iter()
            .map(|q| serde_json::to_string(&augment_qa_record(q, &syn, &ant, &opts, 11)).unwrap())
            .collect()
    };
    let a = run(&qs);
    assert_eq!(a, run(&qs));
    let mut rev = qs.clone();
    rev.reverse();
    let mut b = run(&rev);
    b.reverse();
    assert_eq!(a, b);
    let other: Vec<String> = qs
        .iter()
        .map(|q| serde_json::to_string(&augment_qa_record(q, &syn, &ant, &opts, 12)).unwrap())
        .collect();
    assert_ne!(a, other);
}

#[test]
fn relevance_fit_is_seeded_and_bounded() {
    let emb = ReferenceEmbedder::default();
    let qs = common::qa(1, 200, 10);
    let opts = FitOptions::default();
    let w = fit_relevance(&qs, &emb, &opts).unwrap();
    assert_eq!(w, fit_relevance(&qs, &emb, &opts).unwrap());
    assert_eq!(w.w.len(), 2 * emb.dimension());
    let other = fit_relevance(&qs, &emb, &FitOptions { seed: 1, ..opts }).unwrap();
    assert_ne!(w, other);
    for q in &qs {
        let v = emb.embed_batch(&[q.answers[0].clone(), q.question.clone()]).unwrap();
        let r = relevance_from_embeddings(&v[0], &v[1], &w).unwrap();
        assert!(r > 0.0 && r < 1.0);
    }
}

proptest! {
    #[test]
    fn relevance_strictly_increases_with_bias(
        a in prop::collection::vec(-1.0f64..1.0, 8),
        q in prop::collection::vec(-1.0f64..1.0, 8),
        w in prop::collection::vec(-2.0f64..2.0, 16),
        b in -5.0f64..5.0,
        db in 0.01f64..3.0,
    ) {
        let lo = RelevanceWeights { w: w.clone(), bias: b };
        let hi = RelevanceWeights { w, bias: b + db };
        let (x, y) = (
            relevance_from_embeddings(&a, &q, &lo).unwrap(),
            relevance_from_embeddings(&a, &q, &hi).unwrap(),
        );
        prop_assert!(y > x);
        prop_assert!(x > 0.0 && y < 1.0);
    }

    #[test]
    fn synonym_variants_are_seed_pure(idx in 0usize..100, seed in any::<u64>()) {
        let syn = Thesaurus::default_synonyms();
        let q = &common::qa(9, 100, 10)[idx];
        prop_assert_eq!(synonym_replace(q, &syn, seed, 2, 2), synonym_replace(q, &syn, seed, 2, 2));
    }
}
