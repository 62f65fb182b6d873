//! QA and caption corpora in line-delimited JSON: loading with validation,
//! composition of the final dataset and deterministic persistence.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Box3D;
use crate::quality::{QualityScores, ThresholdSet};
use crate::text::nfc;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}` has provenance {found} inside a {expected} partition")]
    PartitionMismatch {
        id: String,
        expected: Provenance,
        found: Provenance,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// ScanNet scene identifier such as `scene0000_00`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneId(String);

fn scene_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^scene\d{4}_\d{2}$").unwrap())
}

impl SceneId {
    /// Builds a scene id; `strict` additionally enforces the ScanNet pattern.
    pub fn new(value: impl Into<String>, strict: bool) -> Result<Self, String> {
        let value = value.into();
        let id = SceneId(value);
        id.validate(strict)?;
        Ok(id)
    }

    pub fn validate(&self, strict: bool) -> Result<(), String> {
        if self.0.trim().is_empty() {
            return Err("scene_id is empty".into());
        }
        if strict && !scene_pattern().is_match(&self.0) {
            return Err(format!("scene_id `{}` does not match sceneNNNN_NN", self.0));
        }
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SceneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which generation family produced a record.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Original,
    QaGen,
    CaptionGen,
    SceneGen,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Original,
        Provenance::QaGen,
        Provenance::CaptionGen,
        Provenance::SceneGen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::QaGen => "qa_gen",
            Provenance::CaptionGen => "caption_gen",
            Provenance::SceneGen => "scene_gen",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Id for an augmented record: `{provenance}-{source_id}-{variant_index}`.
pub fn augmented_id(provenance: Provenance, source_id: &str, variant: usize) -> String {
    format!("{provenance}-{source_id}-{variant}")
}

/// One question/answer sample tied to a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QARecord {
    #[serde(alias = "question_id")]
    pub id: String,
    pub scene_id: SceneId,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub object_ids: Vec<u32>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<QualityScores>,
}

/// One object description with its optional 3D box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub scene_id: SceneId,
    pub object_id: u32,
    #[serde(default)]
    pub object_name: String,
    pub description: String,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Box3D>,
}

/// Common surface of the record kinds that flow through the pipeline.
pub trait Record: Serialize + DeserializeOwned + Clone + Send + Sync {
    fn id(&self) -> &str;
    fn scene(&self) -> &SceneId;
    /// The text compared by similarity filters: question or description.
    fn text(&self) -> &str;
    fn provenance(&self) -> Provenance;
    /// Checks invariants and applies NFC normalization to text fields.
    fn normalize_and_validate(&mut self, strict: bool) -> Result<(), String>;
}

impl Record for QARecord {
    fn id(&self) -> &str {
        &self.id
    }

    fn scene(&self) -> &SceneId {
        &self.scene_id
    }

    fn text(&self) -> &str {
        &self.question
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }

    fn normalize_and_validate(&mut self, strict: bool) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        self.scene_id.validate(strict)?;
        self.question = nfc(&self.question);
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        if self.answers.is_empty() {
            return Err("answers is empty".into());
        }
        for a in &mut self.answers {
            *a = nfc(a);
            if a.trim().is_empty() {
                return Err("answer is empty".into());
            }
        }
        if self.provenance == Provenance::Original && self.scores.is_some() {
            return Err("original record carries scores".into());
        }
        Ok(())
    }
}

impl Record for CaptionRecord {
    fn id(&self) -> &str {
        &self.id
    }

    fn scene(&self) -> &SceneId {
        &self.scene_id
    }

    fn text(&self) -> &str {
        &self.description
    }

    fn provenance(&self) -> Provenance {
        Provenance::Original
    }

    fn normalize_and_validate(&mut self, strict: bool) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        self.scene_id.validate(strict)?;
        self.object_name = nfc(&self.object_name);
        self.description = nfc(&self.description);
        if self.description.trim().is_empty() {
            return Err("description is empty".into());
        }
        if let Some(b) = &self.bbox {
            b.validate()?;
        }
        Ok(())
    }
}

/// Records read from a file plus the lines skipped in lenient mode.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub skipped: Vec<(usize, String)>,
}

/// Reads a JSONL file of records. Strict mode aborts on the first invalid
/// line; lenient mode skips and reports it. Blank lines are ignored.
pub fn load_records<T: Record>(path: &Path, strict: bool) -> Result<Loaded<T>, CorpusError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::io(path, e),
    })?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<T>(&line)
            .map_err(|e| e.to_string())
            .and_then(|mut r| r.normalize_and_validate(strict).map(|_| r));
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) if strict => {
                return Err(CorpusError::MalformedRecord {
                    line: line_no,
                    reason,
                })
            }
            Err(reason) => {
                log::warn!("{}:{line_no}: skipping record: {reason}", path.display());
                skipped.push((line_no, reason));
            }
        }
    }
    Ok(Loaded { records, skipped })
}

pub fn load_qa(path: &Path, strict: bool) -> Result<Loaded<QARecord>, CorpusError> {
    load_records(path, strict)
}

pub fn load_captions(path: &Path, strict: bool) -> Result<Loaded<CaptionRecord>, CorpusError> {
    load_records(path, strict)
}

/// Bookkeeping for a composed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source_counts: BTreeMap<Provenance, usize>,
    pub total: usize,
    pub seed: u64,
    pub threshold_set: ThresholdSet,
    pub created_at: String,
    /// Records per family before gating and dedup (originals: as ingested).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gross_counts: BTreeMap<Provenance, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backends: Vec<BackendStamp>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: BTreeMap<String, serde_json::Value>,
}

/// Name and version of a model backend used to produce a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendStamp {
    pub role: String,
    pub name: String,
    pub version: String,
}

impl DatasetManifest {
    pub fn new(seed: u64, threshold_set: ThresholdSet, created_at: impl Into<String>) -> Self {
        Self {
            source_counts: BTreeMap::new(),
            total: 0,
            seed,
            threshold_set,
            created_at: created_at.into(),
            gross_counts: BTreeMap::new(),
            backends: Vec::new(),
            settings: BTreeMap::new(),
        }
    }
}

/// Concatenates already-gated partitions in order and counts records per
/// provenance. Fails if an id appears twice.
pub fn compose_final(
    partitions: Vec<(Provenance, Vec<QARecord>)>,
    mut manifest: DatasetManifest,
) -> Result<(Vec<QARecord>, DatasetManifest), CorpusError> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(partitions.iter().map(|(_, r)| r.len()).sum());
    manifest.source_counts.clear();
    for (provenance, records) in partitions {
        manifest.source_counts.entry(provenance).or_insert(0);
        for record in records {
            if record.provenance != provenance {
                return Err(CorpusError::PartitionMismatch {
                    id: record.id,
                    expected: provenance,
                    found: record.provenance,
                });
            }
            if !seen.insert(record.id.clone()) {
                return Err(CorpusError::DuplicateId(record.id));
            }
            *manifest.source_counts.entry(provenance).or_insert(0) += 1;
            out.push(record);
        }
    }
    manifest.total = manifest.source_counts.values().sum();
    Ok((out, manifest))
}

/// Writes records as JSONL, one per line in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| CorpusError::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

/// Writes pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CorpusError::io(path, std::io::Error::other(e)))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))
}

/// Emits `dataset.jsonl` and `manifest.json` into `out_dir`.
pub fn write_dataset<T: Record>(
    records: &[T],
    manifest: &DatasetManifest,
    out_dir: &Path,
) -> Result<(), CorpusError> {
    fs::create_dir_all(out_dir).map_err(|e| CorpusError::io(out_dir, e))?;
    write_jsonl(&out_dir.join("dataset.jsonl"), records)?;
    write_json(&out_dir.join("manifest.json"), manifest)
}
