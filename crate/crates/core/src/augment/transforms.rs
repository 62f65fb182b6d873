//! QA-level text transforms: synonym replacement, logical reversal of
//! yes/no questions and clause order shuffling.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use super::lexicon::Thesaurus;
use crate::corpus::{augmented_id, Provenance, QARecord};
use crate::rng::stream_rng;
use crate::text::{tokenize, tokenize_spans, SpannedToken};

fn derived(q: &QARecord, question: String, answers: Vec<String>, variant: usize) -> QARecord {
    QARecord {
        id: augmented_id(Provenance::QaGen, &q.id, variant),
        scene_id: q.scene_id.clone(),
        question,
        answers,
        object_ids: q.object_ids.clone(),
        provenance: Provenance::QaGen,
        scores: None,
    }
}

/// Copies the casing style of `original` onto `replacement`.
fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = original.chars().count() > 1
        && original
            .chars()
            .filter(|c| c.is_alphabetic())
            .all(char::is_uppercase);
    if all_upper {
        replacement.to_uppercase()
    } else if first_upper {
        let mut c = replacement.chars();
        match c.next() {
            Some(f) => f.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Rebuilds `text` with the token at each listed index replaced.
fn splice(text: &str, tokens: &[SpannedToken], edits: &[(usize, String)]) -> String {
    let mut edits: Vec<&(usize, String)> = edits.iter().collect();
    edits.sort_by_key(|(i, _)| *i);
    let mut out = String::with_capacity(text.len() + 16);
    let mut cursor = 0;
    for (i, replacement) in edits {
        let t = &tokens[*i];
        out.push_str(&text[cursor..t.start]);
        out.push_str(&match_case(&text[t.start..t.end], replacement));
        cursor = t.end;
    }
    out.push_str(&text[cursor..]);
    out
}

fn answer_tokens(q: &QARecord) -> HashSet<String> {
    q.answers.iter().flat_map(|a| tokenize(a)).collect()
}

/// Produces up to `max_variants` distinct questions, each replacing between
/// 1 and `max_subs` distinct question tokens with a thesaurus synonym.
/// Tokens that occur in any answer are never replaced. Returns an empty list
/// when no token is replaceable (or `max_subs` is 0).
pub fn synonym_replace(
    q: &QARecord,
    thesaurus: &Thesaurus,
    seed: u64,
    max_subs: usize,
    max_variants: usize,
) -> Vec<QARecord> {
    if max_subs == 0 || max_variants == 0 {
        return Vec::new();
    }
    let tokens = tokenize_spans(&q.question);
    let protected = answer_tokens(q);
    let candidates: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_word() && !protected.contains(&t.text))
        .filter(|(_, t)| thesaurus.get(&t.text).is_some())
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut rng = stream_rng(seed, "synonym_replace", &q.id);
    let upper = max_subs.min(candidates.len());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..max_variants * 4 {
        if out.len() == max_variants {
            break;
        }
        let k = rng.gen_range(1..=upper);
        let edits: Vec<(usize, String)> = sample(&mut rng, candidates.len(), k)
            .into_iter()
            .map(|c| {
                let pos = candidates[c];
                let syns = thesaurus.get(&tokens[pos].text).unwrap_or_default();
                (pos, syns.choose(&mut rng).cloned().unwrap_or_default())
            })
            .collect();
        let question = splice(&q.question, &tokens, &edits);
        if question != q.question && seen.insert(question.clone()) {
            let idx = out.len();
            out.push(derived(q, question, q.answers.clone(), idx));
        }
    }
    out
}

fn polar_answer(answers: &[String]) -> Option<&'static str> {
    let set: HashSet<String> = answers.iter().map(|a| a.trim().to_lowercase()).collect();
    if set.len() != 1 {
        return None;
    }
    match set.into_iter().next()?.as_str() {
        "yes" => Some("yes"),
        "no" => Some("no"),
        _ => None,
    }
}

/// Flips the first antonym-mapped question token of a yes/no question and
/// swaps the answer. Returns `None` for non-polar questions or questions
/// with no mapped token.
pub fn logical_reverse(q: &QARecord, antonyms: &Thesaurus) -> Option<QARecord> {
    let polar = polar_answer(&q.answers)?;
    let tokens = tokenize_spans(&q.question);
    let (pos, replacement) = tokens.iter().enumerate().find_map(|(i, t)| {
        let alts = antonyms.get(&t.text)?;
        t.is_word().then(|| (i, alts[0].clone()))
    })?;
    let question = splice(&q.question, &tokens, &[(pos, replacement)]);
    let flipped = if polar == "yes" { "no" } else { "yes" };
    let answers = q
        .answers
        .iter()
        .map(|a| match_case(a.trim(), flipped))
        .collect();
    Some(derived(q, question, answers, 0))
}

const WH_WORDS: &[&str] = &["what", "which", "where", "who", "whose", "how", "when", "why"];
const AUX_WORDS: &[&str] = &[
    "is", "are", "was", "were", "does", "do", "did", "can", "could", "would", "will", "should",
    "has", "have",
];
/// Words that open a prepositional clause; a conjunction followed by one of
/// these starts a new movable clause.
const CLAUSE_OPENERS: &[&str] = &[
    "on", "in", "under", "above", "below", "behind", "near", "next", "beside", "left", "right",
    "by", "at", "to", "inside", "between", "across", "against", "along", "close", "underneath",
    "beneath", "facing",
];

struct Clauses<'a> {
    head: Option<&'a str>,
    movable: Vec<&'a str>,
    separators: Vec<&'a str>,
}

fn split_clauses(body: &str) -> Clauses<'_> {
    let tokens = tokenize_spans(body);
    // (segment start, separator start, separator end) boundaries
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        let is_comma = t.text == "," || t.text == ";";
        let is_conj = (t.text == "and" || t.text == "but")
            && tokens
                .get(i + 1)
                .is_some_and(|n| CLAUSE_OPENERS.contains(&n.text.as_str()));
        if is_comma || is_conj {
            let sep_start = if is_conj {
                body[..t.start].trim_end().len()
            } else {
                t.start
            };
            let sep_end = tokens.get(i + 1).map_or(body.len(), |n| n.start);
            cuts.push((sep_start, sep_end));
        }
    }
    let mut segments = Vec::new();
    let mut separators = Vec::new();
    let mut start = 0;
    for (s, e) in cuts {
        segments.push(body[start..s].trim());
        separators.push(&body[s..e]);
        start = e;
    }
    segments.push(body[start..].trim());
    if segments.iter().any(|s| s.is_empty()) {
        return Clauses {
            head: None,
            movable: Vec::new(),
            separators: Vec::new(),
        };
    }

    let first = segments[0];
    let ft = tokenize_spans(first);
    let starts_wh = ft.first().is_some_and(|t| WH_WORDS.contains(&t.text.as_str()));
    if starts_wh {
        let aux = ft
            .iter()
            .take(4)
            .position(|t| AUX_WORDS.contains(&t.text.as_str()));
        if let Some(a) = aux {
            if let Some(rest) = ft.get(a + 1) {
                if CLAUSE_OPENERS.contains(&rest.text.as_str()) {
                    let mut movable = vec![first[rest.start..].trim()];
                    movable.extend(&segments[1..]);
                    return Clauses {
                        head: Some(first[..ft[a].end].trim()),
                        movable,
                        separators,
                    };
                }
            }
        }
    }
    Clauses {
        head: Some(first),
        movable: segments[1..].to_vec(),
        separators,
    }
}

/// Permutes the clauses of a multi-clause question, keeping the WH clause
/// first. Single-clause questions yield `None`.
pub fn order_shuffle(q: &QARecord, seed: u64) -> Option<QARecord> {
    let trimmed = q.question.trim_end();
    let body = trimmed.trim_end_matches(['?', '.', '!']);
    let terminal = &trimmed[body.len()..];
    let body = body.trim_end();

    let clauses = split_clauses(body);
    let head = clauses.head?;
    let n = clauses.movable.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, "order_shuffle", &q.id);
    order.shuffle(&mut rng);
    if order.iter().enumerate().all(|(i, v)| i == *v) {
        order.rotate_left(1);
    }

    // when the head was cut out of the first clause there is one separator
    // fewer than movable clauses
    let head_split = clauses.separators.len() < n;
    let mut out = String::from(head);
    let mut seps = clauses.separators.iter();
    if !head_split {
        out.push_str(seps.next().copied().unwrap_or(", "));
    } else {
        out.push(' ');
    }
    for (i, idx) in order.iter().enumerate() {
        if i > 0 {
            out.push_str(seps.next().copied().unwrap_or(", "));
        }
        out.push_str(clauses.movable[*idx]);
    }
    out.push_str(terminal);
    Some(derived(q, out, q.answers.clone(), 0))
}
