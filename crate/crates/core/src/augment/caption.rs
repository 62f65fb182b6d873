//! Caption-to-QA conversion: a small pattern extractor that pulls the head
//! object, colors, count, spatial relations and a trailing location phrase
//! out of an object description, and the handcrafted question templates
//! filled from those facts.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::corpus::{augmented_id, CaptionRecord, Provenance, QARecord};
use crate::text::{is_word, parse_cardinal, parse_word_list, singularize, stopwords, tokenize};

const COLORS_TXT: &str = include_str!("../../resources/colors.txt");
const RELATIONS_TXT: &str = include_str!("../../resources/relations.txt");
const TEMPLATES_JSON: &str = include_str!("../../resources/templates.json");

const LOCATION_PREPS: &[&str] = &["in", "by", "at", "against", "along"];
const DETERMINERS: &[&str] = &["the", "a", "an"];
/// Words that close a noun phrase.
const NP_BREAKERS: &[&str] = &[
    "that", "which", "with", "is", "are", "and", "has", "have", "sits", "sitting", "placed",
    "located", "standing", "stands", "lies", "lying", "hangs", "hanging", "it", "its", "where",
    "while", "of", "for", "from", "facing", "between",
];

#[derive(Debug, Clone, PartialEq, Eq)]
struct RelationPhrase {
    tokens: Vec<String>,
    canonical: String,
}

/// Color and relation word lists used by the caption parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    colors: HashSet<String>,
    relations: Vec<RelationPhrase>,
}

impl Lexicons {
    /// Builds lexicons from plain-text lists. Relation lines may read
    /// `phrase => canonical`.
    pub fn from_lists(colors: &str, relations: &str) -> Self {
        let colors = parse_word_list(colors).into_iter().collect();
        let mut rels: Vec<RelationPhrase> = parse_word_list(relations)
            .into_iter()
            .map(|line| {
                let (phrase, canonical) = match line.split_once("=>") {
                    Some((p, c)) => (p.trim().to_string(), c.trim().to_string()),
                    None => (line.clone(), line.clone()),
                };
                RelationPhrase {
                    tokens: tokenize(&phrase),
                    canonical,
                }
            })
            .filter(|r| !r.tokens.is_empty())
            .collect();
        rels.sort_by_key(|r| std::cmp::Reverse(r.tokens.len()));
        Self {
            colors,
            relations: rels,
        }
    }

    pub fn load(colors: &Path, relations: &Path) -> Result<Self, AugmentError> {
        let c = std::fs::read_to_string(colors).map_err(|e| AugmentError::io(colors, e))?;
        let r = std::fs::read_to_string(relations).map_err(|e| AugmentError::io(relations, e))?;
        Ok(Self::from_lists(&c, &r))
    }

    pub fn is_color(&self, token: &str) -> bool {
        self.colors.contains(token)
    }

    /// Longest relation phrase starting at `tokens[i]`: (canonical, end).
    fn relation_at(&self, tokens: &[String], i: usize) -> Option<(String, usize)> {
        self.relations.iter().find_map(|r| {
            let end = i + r.tokens.len();
            (end <= tokens.len() && tokens[i..end] == r.tokens[..])
                .then(|| (r.canonical.clone(), end))
        })
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::from_lists(COLORS_TXT, RELATIONS_TXT)
    }
}

/// What the parser could read out of one description.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionFacts {
    pub object: String,
    pub colors: Vec<String>,
    pub count: Option<u32>,
    pub relations: Vec<(String, String)>,
    pub location: Option<String>,
}

fn location_start(tokens: &[String], i: usize) -> bool {
    LOCATION_PREPS.contains(&tokens[i].as_str())
        && tokens
            .get(i + 1)
            .is_some_and(|n| DETERMINERS.contains(&n.as_str()))
}

fn is_boundary(tokens: &[String], i: usize, lex: &Lexicons) -> bool {
    let t = &tokens[i];
    !is_word(t)
        || NP_BREAKERS.contains(&t.as_str())
        || lex.relation_at(tokens, i).is_some()
        || location_start(tokens, i)
}

/// Content head of a noun phrase: its last word that is not a determiner,
/// color, number or stopword.
fn head_noun(span: &[String], lex: &Lexicons) -> Option<String> {
    span.iter()
        .rev()
        .find(|t| {
            is_word(t)
                && !DETERMINERS.contains(&t.as_str())
                && !lex.is_color(t)
                && parse_cardinal(t).is_none()
                && !stopwords().contains(*t)
        })
        .cloned()
}

fn span_end(tokens: &[String], from: usize, lex: &Lexicons) -> usize {
    (from..tokens.len())
        .find(|&j| j > from && is_boundary(tokens, j, lex))
        .unwrap_or(tokens.len())
}

/// Extracts facts from a description. A non-empty `object_name` overrides
/// the parsed head noun.
pub fn parse_description(description: &str, object_name: Option<&str>, lex: &Lexicons) -> CaptionFacts {
    let tokens = tokenize(description);
    let mut facts = CaptionFacts::default();

    // skip "this is" / "there are" style openers
    let np_start = match (tokens.first(), tokens.get(1)) {
        (Some(a), Some(b))
            if matches!(a.as_str(), "this" | "it" | "there" | "that")
                && matches!(b.as_str(), "is" | "are") =>
        {
            2
        }
        _ => 0,
    };
    // leading noun phrase: up to the first boundary
    let np_end = (np_start..tokens.len())
        .find(|&i| is_boundary(&tokens, i, lex))
        .unwrap_or(tokens.len());
    let np = &tokens[np_start..np_end];

    for t in np {
        if lex.is_color(t) && !facts.colors.contains(t) {
            facts.colors.push(t.clone());
        }
    }
    facts.count = np
        .iter()
        .filter(|t| !DETERMINERS.contains(&t.as_str()))
        .find_map(|t| parse_cardinal(t))
        .filter(|n| *n >= 1);

    let given = object_name
        .map(|n| n.replace('_', " ").trim().to_lowercase())
        .filter(|n| !n.is_empty());
    facts.object = match given {
        Some(n) => n,
        None => {
            let head = head_noun(np, lex).or_else(|| {
                tokens
                    .iter()
                    .find(|t| is_word(t) && !stopwords().contains(*t) && !lex.is_color(t))
                    .cloned()
            });
            match head {
                Some(h) if facts.count.is_some_and(|c| c > 1) => singularize(&h),
                Some(h) => h,
                None => String::new(),
            }
        }
    };

    let mut i = np_end;
    let mut last_location: Option<String> = None;
    while i < tokens.len() {
        if let Some((relation, end)) = lex.relation_at(&tokens, i) {
            let stop = span_end(&tokens, end.saturating_sub(1), lex).max(end);
            if let Some(target) = head_noun(&tokens[end..stop], lex) {
                facts.relations.push((relation, target));
            }
            last_location = None;
            i = stop.max(i + 1);
        } else if location_start(&tokens, i) {
            let stop = span_end(&tokens, i + 1, lex);
            let phrase: Vec<&str> = tokens[i..stop]
                .iter()
                .filter(|t| is_word(t))
                .map(String::as_str)
                .collect();
            last_location = (phrase.len() >= 3).then(|| phrase.join(" "));
            i = stop;
        } else {
            i += 1;
        }
    }
    facts.location = last_location;
    facts
}

pub fn parse_caption(c: &CaptionRecord, lex: &Lexicons) -> CaptionFacts {
    parse_description(&c.description, Some(&c.object_name), lex)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateCategory {
    Color,
    Count,
    Type,
    Spatial,
    Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerSlot {
    Color,
    Count,
    Object,
    RelationTarget,
    LocationPhrase,
}

/// A handcrafted question pattern with `{object}`, `{anchor}` and
/// `{relation}` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QATemplate {
    pub id: String,
    pub category: TemplateCategory,
    pub question_pattern: String,
    pub answer_slot: AnswerSlot,
}

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_]+)\}").unwrap())
}

fn unfilled_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{[^{}]*\}").unwrap())
}

impl QATemplate {
    pub fn slots(&self) -> Vec<&str> {
        slot_re()
            .captures_iter(&self.question_pattern)
            .map(|c| c.get(1).unwrap().as_str())
            .collect()
    }

    fn needs_relation(&self) -> bool {
        self.answer_slot == AnswerSlot::RelationTarget
            || self.slots().iter().any(|s| *s == "anchor" || *s == "relation")
    }
}

/// Validates a template set: every pattern has a known slot, ids are unique.
pub fn validate_templates(templates: &[QATemplate]) -> Result<(), AugmentError> {
    let mut ids = HashSet::new();
    for t in templates {
        let slots = t.slots();
        if slots.is_empty() {
            return Err(AugmentError::InvalidTemplate(format!("{}: pattern has no slot", t.id)));
        }
        if let Some(s) = slots
            .iter()
            .find(|s| !matches!(**s, "object" | "anchor" | "relation"))
        {
            return Err(AugmentError::InvalidTemplate(format!("{}: unknown slot `{s}`", t.id)));
        }
        if !ids.insert(t.id.as_str()) {
            return Err(AugmentError::InvalidTemplate(format!("duplicate template id `{}`", t.id)));
        }
    }
    Ok(())
}

pub fn templates_from_json(text: &str) -> Result<Vec<QATemplate>, AugmentError> {
    let t: Vec<QATemplate> =
        serde_json::from_str(text).map_err(|e| AugmentError::InvalidTemplate(e.to_string()))?;
    validate_templates(&t)?;
    Ok(t)
}

pub fn load_templates(path: &Path) -> Result<Vec<QATemplate>, AugmentError> {
    let text = std::fs::read_to_string(path).map_err(|e| AugmentError::io(path, e))?;
    templates_from_json(&text)
}

/// The 32 shipped templates.
pub fn default_templates() -> Vec<QATemplate> {
    templates_from_json(TEMPLATES_JSON).expect("bundled templates are valid")
}

/// Fills one template from `facts`; `None` when a required slot or the
/// answer cannot be supplied.
pub fn fill_template(t: &QATemplate, facts: &CaptionFacts) -> Option<(String, String)> {
    if facts.object.is_empty() {
        return None;
    }
    let relation = facts.relations.first();
    if t.needs_relation() && relation.is_none() {
        return None;
    }
    let answer = match t.answer_slot {
        AnswerSlot::Color => facts.colors.first()?.clone(),
        AnswerSlot::Count => facts.count?.to_string(),
        AnswerSlot::Object => facts.object.clone(),
        AnswerSlot::RelationTarget => relation?.1.clone(),
        AnswerSlot::LocationPhrase => facts.location.clone()?,
    };
    let mut q = t.question_pattern.replace("{object}", &facts.object);
    if let Some((rel, target)) = relation {
        q = q.replace("{relation}", rel).replace("{anchor}", target);
    }
    if unfilled_re().is_match(&q) {
        return None;
    }
    Some((q, answer))
}

/// One QA record per template satisfiable from `facts`.
pub fn caption_to_qa(c: &CaptionRecord, templates: &[QATemplate], facts: &CaptionFacts) -> Vec<QARecord> {
    templates
        .iter()
        .filter_map(|t| fill_template(t, facts))
        .enumerate()
        .map(|(i, (question, answer))| QARecord {
            id: augmented_id(Provenance::CaptionGen, &c.id, i),
            scene_id: c.scene_id.clone(),
            question,
            answers: vec![answer],
            object_ids: vec![c.object_id],
            provenance: Provenance::CaptionGen,
            scores: None,
        })
        .collect()
}
