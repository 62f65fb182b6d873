//! Synthetic 3D scene dataset construction: corpus I/O, text augmentation,
//! quality gating, scoring backends and captioning metrics.

pub mod augment;
pub mod backends;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod text;

pub use augment::AugmentError;
pub use backends::{BackendError, EmbeddingBackend, GeneratorBackend, NliBackend};
pub use corpus::{CaptionRecord, CorpusError, DatasetManifest, Provenance, QARecord, Record, SceneId};
pub use metrics::{Box3D, Candidate, MetricError, MetricReport, ReferenceSet};
pub use quality::{GateError, QualityScores, Task, ThresholdSet};
pub use pipeline::{classify_question, stats, Pipeline, PipelineConfig, PipelineError, StatsReport};
