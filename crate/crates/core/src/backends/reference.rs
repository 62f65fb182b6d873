//! Deterministic offline backends.
//!
//! `ReferenceEmbedder` is a signed hashed bag-of-words, `ReferenceNli` is a
//! content-token containment score, and `ReferenceGenerator` fills caption
//! templates from the facts found in the scene context.

use std::collections::HashSet;

use rand::seq::index::sample;

use super::{
    BackendError, EmbeddingBackend, Generated, GenerationRequest, GeneratorBackend, NliBackend,
    QaCandidate,
};
use crate::augment::caption::{fill_template, parse_description, Lexicons, QATemplate};
use crate::rng::stream_rng;
use crate::text::{is_word, stopwords, tokenize};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bucket index in `[0, dimension)` and sign (±1) for a token.
pub fn token_bucket(token: &str, dimension: usize, hash_seed: u64) -> (usize, f64) {
    let h = splitmix64(fnv1a(hash_seed, token.as_bytes()));
    let index = (h % dimension as u64) as usize;
    let sign_bits = splitmix64(h ^ 0x5bd1_e995_5bd1_e995);
    let sign = if sign_bits >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

/// Signed hashed bag-of-words over the shared tokenizer, L2-normalized.
/// Empty token lists give the zero vector.
pub fn reference_embed(text: &str, dimension: usize, hash_seed: u64) -> Vec<f64> {
    assert!(dimension >= 8, "reference embedding dimension must be >= 8");
    let mut v = vec![0.0; dimension];
    for token in tokenize(text) {
        let (i, s) = token_bucket(&token, dimension, hash_seed);
        v[i] += s;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Fraction of the hypothesis' content tokens found in the premise.
/// A hypothesis with no content tokens scores 1.0.
pub fn reference_nli(premise: &str, hypothesis: &str) -> f64 {
    let premise_tokens: HashSet<String> = tokenize(premise).into_iter().collect();
    let stop = stopwords();
    let content: Vec<String> = tokenize(hypothesis)
        .into_iter()
        .filter(|t| is_word(t) && !stop.contains(t))
        .collect();
    if content.is_empty() {
        return 1.0;
    }
    let hits = content.iter().filter(|t| premise_tokens.contains(*t)).count();
    hits as f64 / content.len() as f64
}

#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    dimension: usize,
    hash_seed: u64,
    version: String,
}

impl ReferenceEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize, hash_seed: u64) -> Self {
        assert!(dimension >= 8, "reference embedding dimension must be >= 8");
        Self {
            dimension,
            hash_seed,
            version: format!("hashed-bow-1/d{dimension}/s{hash_seed}"),
        }
    }
}

impl Default for ReferenceEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION, 0)
    }
}

impl EmbeddingBackend for ReferenceEmbedder {
    fn name(&self) -> &str {
        "reference-embed"
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts
            .iter()
            .map(|t| reference_embed(t, self.dimension, self.hash_seed))
            .collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceNli;

impl NliBackend for ReferenceNli {
    fn name(&self) -> &str {
        "reference-nli"
    }

    fn version(&self) -> &str {
        "token-containment-1"
    }

    fn entailment_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, BackendError> {
        Ok(pairs.iter().map(|(p, h)| reference_nli(p, h)).collect())
    }
}

/// Template-filling stand-in for a scene-level VLM. Always returns exactly
/// `min(k, max_candidates)` well-formed pairs.
#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    templates: Vec<QATemplate>,
    lexicons: Lexicons,
    max_candidates: usize,
}

impl ReferenceGenerator {
    pub fn new(templates: Vec<QATemplate>, lexicons: Lexicons, max_candidates: usize) -> Self {
        Self {
            templates,
            lexicons,
            max_candidates: max_candidates.max(1),
        }
    }

    fn candidates(&self, context: &str) -> Vec<QaCandidate> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for segment in context.split(['\n', ';', '.']) {
            if segment.trim().is_empty() {
                continue;
            }
            let facts = parse_description(segment, None, &self.lexicons);
            if facts.object.is_empty() {
                continue;
            }
            for t in &self.templates {
                if let Some((q, a)) = fill_template(t, &facts) {
                    if seen.insert(q.clone()) {
                        out.push(QaCandidate::new(q, a));
                    }
                }
            }
        }
        out
    }
}

impl Default for ReferenceGenerator {
    fn default() -> Self {
        Self::new(
            crate::augment::caption::default_templates(),
            Lexicons::default(),
            64,
        )
    }
}

impl GeneratorBackend for ReferenceGenerator {
    fn name(&self) -> &str {
        "reference-generator"
    }

    fn version(&self) -> &str {
        "template-fill-1"
    }

    fn max_candidates(&self) -> usize {
        self.max_candidates
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generated, BackendError> {
        let k = request.k.min(self.max_candidates);
        let mut pool = self.candidates(&request.context);
        if pool.is_empty() {
            pool.push(QaCandidate::new("what is in this room?", "furniture"));
        }
        let candidates = if pool.len() >= k {
            let mut rng = stream_rng(0, "reference_generator", &request.scene_id);
            let mut picked = sample(&mut rng, pool.len(), k).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| pool[i].clone()).collect()
        } else {
            pool.iter().cycle().take(k).cloned().collect()
        };
        Ok(Generated {
            candidates,
            dropped: 0,
        })
    }
}
