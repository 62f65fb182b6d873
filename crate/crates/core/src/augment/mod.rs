//! The three augmentation families: QA text transforms, caption-to-QA
//! template conversion, and scene-to-QA generation through a backend.

pub mod caption;
pub mod lexicon;
pub mod relevance;
pub mod scene;
pub mod transforms;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;
use crate::corpus::{augmented_id, Provenance, QARecord};

pub use caption::{
    caption_to_qa, default_templates, fill_template, parse_caption, parse_description,
    AnswerSlot, CaptionFacts, Lexicons, QATemplate, TemplateCategory,
};
pub use lexicon::Thesaurus;
pub use relevance::{fit_relevance, relevance, relevance_from_embeddings, FitOptions, RelevanceWeights};
pub use scene::{scene_context, scene_to_qa, SceneQa};
pub use transforms::{logical_reverse, order_shuffle, synonym_replace};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AugmentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AugmentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Which QA-level transforms run, and how many synonym variants to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaTransformOptions {
    pub synonym: bool,
    pub reverse: bool,
    pub shuffle: bool,
    pub max_subs: usize,
    pub synonym_variants: usize,
}

impl Default for QaTransformOptions {
    fn default() -> Self {
        Self {
            synonym: true,
            reverse: true,
            shuffle: true,
            max_subs: 2,
            synonym_variants: 2,
        }
    }
}

/// All QA-level variants of one record, numbered `qa_gen-{id}-{0..}` in
/// transform order (synonyms, reversal, shuffle).
pub fn augment_qa_record(
    q: &QARecord,
    synonyms: &Thesaurus,
    antonyms: &Thesaurus,
    opts: &QaTransformOptions,
    seed: u64,
) -> Vec<QARecord> {
    let mut out = Vec::new();
    if opts.synonym {
        out.extend(synonym_replace(q, synonyms, seed, opts.max_subs, opts.synonym_variants));
    }
    if opts.reverse {
        out.extend(logical_reverse(q, antonyms));
    }
    if opts.shuffle {
        out.extend(order_shuffle(q, seed));
    }
    for (i, r) in out.iter_mut().enumerate() {
        r.id = augmented_id(Provenance::QaGen, &q.id, i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SceneId;

    #[test]
    fn family_ids_are_unique_per_source() {
        let q = QARecord {
            id: "q9".into(),
            scene_id: SceneId::new("scene0000_00", true).unwrap(),
            question: "is the big door on the left, next to the window open?".into(),
            answers: vec!["yes".into()],
            object_ids: vec![],
            provenance: Provenance::Original,
            scores: None,
        };
        let out = augment_qa_record(
            &q,
            &Thesaurus::default_synonyms(),
            &Thesaurus::default_antonyms(),
            &QaTransformOptions::default(),
            3,
        );
        assert!(out.len() >= 2);
        let ids: std::collections::HashSet<_> = out.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids.len(), out.len());
        assert!(out.iter().all(|r| r.provenance == Provenance::QaGen));
    }
}
