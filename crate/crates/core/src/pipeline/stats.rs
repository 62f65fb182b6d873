use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Provenance, QARecord};
use crate::text::words;

/// Question taxonomy used for the dataset histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionCategory {
    LocalObject,
    GlobalContext,
    Relational,
    DirectionPosition,
    Other,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 5] = [
        QuestionCategory::LocalObject,
        QuestionCategory::GlobalContext,
        QuestionCategory::Relational,
        QuestionCategory::DirectionPosition,
        QuestionCategory::Other,
    ];
}

const LOCAL_PREFIXES: &[&str] = &["what color", "what colour", "what type", "what kind"];
const GLOBAL_PREFIXES: &[&str] = &["how many", "are there more"];
const RELATION_PHRASES: &[&str] = &["right of", "left of", "middle", "next to"];
const DIRECTION_PREFIXES: &[&str] = &["where", "which way"];

fn starts_with_phrase(text: &str, phrase: &str) -> bool {
    text == phrase || text.starts_with(&format!("{phrase} "))
}

fn contains_phrase(text: &str, phrase: &str) -> bool {
    format!(" {text} ").contains(&format!(" {phrase} "))
}

/// First matching rule wins: attribute prefixes, counting prefixes,
/// relation phrases anywhere, location prefixes, then `Other`.
pub fn classify_question(question: &str) -> QuestionCategory {
    let q = words(question).join(" ");
    if LOCAL_PREFIXES.iter().any(|p| starts_with_phrase(&q, p)) {
        QuestionCategory::LocalObject
    } else if GLOBAL_PREFIXES.iter().any(|p| starts_with_phrase(&q, p)) {
        QuestionCategory::GlobalContext
    } else if RELATION_PHRASES.iter().any(|p| contains_phrase(&q, p)) {
        QuestionCategory::Relational
    } else if DIRECTION_PREFIXES.iter().any(|p| starts_with_phrase(&q, p)) {
        QuestionCategory::DirectionPosition
    } else {
        QuestionCategory::Other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerCount {
    pub answer: String,
    pub count: usize,
}

/// Per-family accounting of one pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyFunnel {
    /// Produced by the transform before the family cap.
    pub candidates: usize,
    /// Left after the cap; every one ends up kept or rejected.
    pub generated: usize,
    pub rejected_low_relevance: usize,
    pub rejected_threshold: usize,
    pub duplicates: usize,
    pub kept: usize,
    /// Mean gate score over `generated` and over `kept`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_score_generated: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_score_kept: Option<f64>,
    /// Malformed backend candidates.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub question_type_histogram: BTreeMap<QuestionCategory, usize>,
    pub top_answers: Vec<AnswerCount>,
    pub totals: BTreeMap<Provenance, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub augmentation: BTreeMap<Provenance, FamilyFunnel>,
}

pub const TOP_ANSWERS: usize = 20;

/// Question-type histogram, the 20 most frequent first answers (count
/// descending, then answer ascending) and per-provenance totals.
pub fn stats(records: &[QARecord]) -> StatsReport {
    let mut histogram: BTreeMap<QuestionCategory, usize> =
        QuestionCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut totals: BTreeMap<Provenance, usize> = Provenance::ALL.iter().map(|p| (*p, 0)).collect();
    let mut answers: HashMap<String, usize> = HashMap::new();
    for r in records {
        *histogram.entry(classify_question(&r.question)).or_insert(0) += 1;
        *totals.entry(r.provenance).or_insert(0) += 1;
        if let Some(a) = r.answers.first() {
            *answers.entry(a.trim().to_lowercase()).or_insert(0) += 1;
        }
    }
    let mut top: Vec<AnswerCount> = answers
        .into_iter()
        .map(|(answer, count)| AnswerCount { answer, count })
        .collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.answer.cmp(&b.answer)));
    top.truncate(TOP_ANSWERS);
    StatsReport {
        total: records.len(),
        question_type_histogram: histogram,
        top_answers: top,
        totals,
        augmentation: BTreeMap::new(),
    }
}
