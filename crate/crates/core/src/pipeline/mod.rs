//! Batch orchestration: ingest → augment → score → gate → dedup → compose →
//! stats, with per-stage JSONL checkpoints under `{output_dir}/work/`.
//!
//! Every checkpoint carries a fingerprint of the config, the input files
//! and the backend versions. `run` reuses each stage whose checkpoint
//! matches, so a run that died on a backend error resumes at the failing
//! stage.

mod config;
mod evaluate;
mod stages;
mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::augment::{AugmentError, Lexicons, QATemplate, Thesaurus};
use crate::backends::{
    BackendError, EmbeddingBackend, GeneratorBackend, HttpEmbedder, HttpGenerator, HttpNli,
    NliBackend, ReferenceEmbedder, ReferenceGenerator, ReferenceNli,
};
use crate::corpus::{BackendStamp, CorpusError};
use crate::metrics::MetricError;
use crate::quality::{calibrate_threshold, GateError, ThresholdSet};

pub use config::{
    AugmentConfig, BackendConfig, BackendKind, CaptionGenConfig, Inputs, PipelineConfig, QaGenConfig,
    ReferenceSettings, RelevanceConfig, ResourcePaths, SceneGenConfig, ThresholdConfig, ENV_EMBED_URL,
    ENV_GEN_URL, ENV_NLI_URL,
};
pub use evaluate::{align, evaluate_files, GatedBlock, GroundTruth, MetricsFile, Prediction, ScoreBlock};
pub use stages::{dataset_stats, run, source_of, task_for, Stage};
pub use stats::{classify_question, stats, AnswerCount, FamilyFunnel, QuestionCategory, StatsReport};

/// Failure inside one stage.
#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Data(String),
    #[error("no usable checkpoint for `{0}`; run that stage first (or the config changed since)")]
    MissingCheckpoint(&'static str),
}

impl StageError {
    pub fn at(self, stage: &'static str) -> PipelineError {
        PipelineError::Stage { stage, source: self }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_DATA: i32 = 4;

impl PipelineError {
    pub fn stage(stage: &'static str, e: impl Into<StageError>) -> Self {
        e.into().at(stage)
    }

    /// 2 for configuration problems, 3 for backend failures, 4 for data.
    pub fn exit_code(&self) -> i32 {
        let source = match self {
            PipelineError::ConfigInvalid(_) => return EXIT_CONFIG,
            PipelineError::Stage { source, .. } => source,
        };
        match source {
            StageError::Backend(_)
            | StageError::Augment(AugmentError::Backend(_))
            | StageError::Gate(GateError::Backend(_)) => EXIT_BACKEND,
            StageError::MissingCheckpoint(_)
            | StageError::Augment(
                AugmentError::InvalidLexicon(_)
                | AugmentError::InvalidTemplate(_)
                | AugmentError::InvalidParameter(_)
                | AugmentError::DimensionMismatch { .. }
                | AugmentError::Io { .. },
            )
            | StageError::Gate(GateError::InvalidThreshold(_) | GateError::InsufficientSamples(_)) => {
                EXIT_CONFIG
            }
            _ => EXIT_DATA,
        }
    }
}

/// Reads a JSONL file of any record type, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CorpusError::FileNotFound(path.to_path_buf()).into())
        }
        Err(e) => {
            return Err(CorpusError::Io {
                path: path.to_path_buf(),
                source: e,
            }
            .into())
        }
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                CorpusError::MalformedRecord {
                    line: i + 1,
                    reason: format!("{}: {e}", path.display()),
                }
                .into()
            })
        })
        .collect()
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| StageError::Data(format!("{}: {e}", path.display())))
}

/// Lexicons and templates used by the augmentation families.
#[derive(Debug, Clone)]
pub struct Resources {
    pub synonyms: Thesaurus,
    pub antonyms: Thesaurus,
    pub templates: Vec<QATemplate>,
    pub lexicons: Lexicons,
}

impl Resources {
    pub fn load(paths: &ResourcePaths) -> Result<Self, AugmentError> {
        let synonyms = match &paths.thesaurus {
            Some(p) => Thesaurus::load(p)?,
            None => Thesaurus::default_synonyms(),
        };
        let antonyms = match &paths.antonyms {
            Some(p) => Thesaurus::load(p)?,
            None => Thesaurus::default_antonyms(),
        };
        antonyms.check_involutive()?;
        let templates = match &paths.templates {
            Some(p) => crate::augment::caption::load_templates(p)?,
            None => crate::augment::default_templates(),
        };
        let lexicons = match (&paths.colors, &paths.relations) {
            (None, None) => Lexicons::default(),
            (Some(c), Some(r)) => Lexicons::load(c, r)?,
            _ => {
                return Err(AugmentError::InvalidLexicon(
                    "colors and relations lexicons must be given together".into(),
                ))
            }
        };
        Ok(Self {
            synonyms,
            antonyms,
            templates,
            lexicons,
        })
    }
}

/// The three model roles. Reference implementations run offline.
#[derive(Clone)]
pub struct Backends {
    pub embedder: Arc<dyn EmbeddingBackend>,
    pub nli: Arc<dyn NliBackend>,
    pub generator: Arc<dyn GeneratorBackend>,
}

impl Backends {
    pub fn reference(settings: &ReferenceSettings, resources: &Resources) -> Self {
        Self {
            embedder: Arc::new(ReferenceEmbedder::new(settings.dimension, settings.hash_seed)),
            nli: Arc::new(ReferenceNli),
            generator: Arc::new(ReferenceGenerator::new(
                resources.templates.clone(),
                resources.lexicons.clone(),
                settings.max_candidates,
            )),
        }
    }

    /// HTTP clients for configured endpoints; roles without an endpoint
    /// fall back to the reference implementation.
    pub fn from_config(cfg: &BackendConfig, resources: &Resources) -> Result<Self, BackendError> {
        let mut b = Self::reference(&cfg.reference, resources);
        if cfg.kind == BackendKind::Reference {
            return Ok(b);
        }
        if let Some(ep) = &cfg.embed {
            b.embedder = Arc::new(HttpEmbedder::new(ep.clone())?);
        }
        if let Some(ep) = &cfg.nli {
            b.nli = Arc::new(HttpNli::new(ep.clone())?);
        }
        if let Some(ep) = &cfg.generate {
            b.generator = Arc::new(HttpGenerator::new(ep.clone())?);
        }
        Ok(b)
    }

    pub fn stamps(&self) -> Vec<BackendStamp> {
        vec![
            BackendStamp {
                role: "embed".into(),
                name: self.embedder.name().into(),
                version: self.embedder.version().into(),
            },
            BackendStamp {
                role: "nli".into(),
                name: self.nli.name().into(),
                version: self.nli.version().into(),
            },
            BackendStamp {
                role: "generate".into(),
                name: self.generator.name().into(),
                version: self.generator.version().into(),
            },
        ]
    }
}

/// Gate values from a thresholds file, calibration scores, or the defaults.
pub fn resolve_thresholds(cfg: &ThresholdConfig) -> Result<ThresholdSet, PipelineError> {
    if let Some(path) = &cfg.file {
        let set: ThresholdSet =
            read_json(path).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        set.check()
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        return Ok(set);
    }
    if cfg.calibration_scores.is_empty() {
        return Ok(ThresholdSet::fixed_default());
    }
    let entries = cfg
        .calibration_scores
        .iter()
        .map(|(task, scores)| calibrate_threshold(scores, *task))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::ConfigInvalid(format!("calibration: {e}")))?;
    Ok(ThresholdSet::calibrated(&entries))
}

/// A configured pipeline bound to its backends.
pub struct Pipeline {
    cfg: PipelineConfig,
    resources: Resources,
    backends: Backends,
    thresholds: ThresholdSet,
    resume: bool,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let resources = Resources::load(&cfg.augment.resources)
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        let backends =
            Backends::from_config(&cfg.backends, &resources).map_err(|e| PipelineError::stage("ingest", e))?;
        Self::assemble(cfg, resources, backends)
    }

    /// Uses caller-supplied backends instead of building them from config.
    pub fn with_backends(cfg: PipelineConfig, backends: Backends) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let resources = Resources::load(&cfg.augment.resources)
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        Self::assemble(cfg, resources, backends)
    }

    fn assemble(cfg: PipelineConfig, resources: Resources, backends: Backends) -> Result<Self, PipelineError> {
        let thresholds = resolve_thresholds(&cfg.thresholds)?;
        Ok(Self {
            cfg,
            resources,
            backends,
            thresholds,
            resume: true,
        })
    }

    /// Whether `run` may reuse matching checkpoints (default true).
    pub fn resume(mut self, resume: bool) -> Self {
        self.resume = resume;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn thresholds(&self) -> &ThresholdSet {
        &self.thresholds
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn work_dir(&self) -> PathBuf {
        self.cfg.output_dir.join("work")
    }
}

pub(crate) fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    Ok(crate::corpus::write_json(path, value)?)
}
