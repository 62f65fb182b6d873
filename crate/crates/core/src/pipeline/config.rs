use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::QaTransformOptions;
use crate::backends::EndpointConfig;
use crate::quality::{GateDirection, Task};

use super::PipelineError;

pub const ENV_EMBED_URL: &str = "SDF_EMBED_URL";
pub const ENV_NLI_URL: &str = "SDF_NLI_URL";
pub const ENV_GEN_URL: &str = "SDF_GEN_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub qa: PathBuf,
    pub captions: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Reference,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(BackendKind::Reference),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}` (expected reference or http)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSettings {
    pub dimension: usize,
    pub hash_seed: u64,
    pub max_candidates: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            dimension: 256,
            hash_seed: 0,
            max_candidates: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub reference: ReferenceSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed: Option<EndpointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nli: Option<EndpointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaGenConfig {
    pub enabled: bool,
    /// Cap on generated records for the family; `None` keeps all.
    pub target: Option<usize>,
    #[serde(flatten)]
    pub transforms: QaTransformOptions,
}

impl Default for QaGenConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            target: None,
            transforms: QaTransformOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionGenConfig {
    pub enabled: bool,
    pub target: Option<usize>,
    /// QA pairs sampled per caption; also the `n` of the consistency mean.
    pub pairs_per_caption: usize,
}

impl Default for CaptionGenConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            target: None,
            pairs_per_caption: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenConfig {
    pub enabled: bool,
    pub target: Option<usize>,
    pub pairs_per_scene: usize,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            target: None,
            pairs_per_scene: 4,
        }
    }
}

/// Optional overrides of the bundled lexicons and templates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourcePaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thesaurus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antonyms: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub qa_gen: QaGenConfig,
    pub caption_gen: CaptionGenConfig,
    pub scene_gen: SceneGenConfig,
    pub resources: ResourcePaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceConfig {
    /// Pre-fitted weights file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// Fit weights on the ingested QA corpus when no file is given.
    pub fit: bool,
    pub min_rel: f64,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            weights: None,
            fit: false,
            min_rel: 0.5,
        }
    }
}

impl RelevanceConfig {
    pub fn active(&self) -> bool {
        self.weights.is_some() || self.fit
    }
}

/// Where the gate values come from. With neither a file nor calibration
/// scores, the fixed defaults apply.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    /// A `thresholds.json` written by `calibrate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Reference score samples per task; each listed task is calibrated.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub calibration_scores: BTreeMap<Task, Vec<f64>>,
    pub direction: GateDirection,
}

fn default_theta() -> f64 {
    0.95
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub strict: bool,
    /// Timestamp written to the manifest. Falls back to `SOURCE_DATE_EPOCH`
    /// and then to the Unix epoch so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default)]
    pub backends: BackendConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub relevance: RelevanceConfig,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default = "default_theta")]
    pub theta_dup: f64,
}

impl PipelineConfig {
    /// Minimal config over two input files with every default.
    pub fn new(qa: impl Into<PathBuf>, captions: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            inputs: Inputs {
                qa: qa.into(),
                captions: captions.into(),
            },
            output_dir: output_dir.into(),
            seed: 0,
            strict: false,
            created_at: None,
            backends: BackendConfig::default(),
            augment: AugmentConfig::default(),
            relevance: RelevanceConfig::default(),
            thresholds: ThresholdConfig::default(),
            theta_dup: default_theta(),
        }
    }

    /// Reads a JSON config. Relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.inputs.qa);
        fix(&mut self.inputs.captions);
        fix(&mut self.output_dir);
        let r = &mut self.augment.resources;
        for p in [&mut r.thesaurus, &mut r.antonyms, &mut r.templates, &mut r.colors, &mut r.relations]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(p) = &mut self.relevance.weights {
            fix(p);
        }
        if let Some(p) = &mut self.thresholds.file {
            fix(p);
        }
    }

    /// Endpoint URLs from `SDF_EMBED_URL`, `SDF_NLI_URL` and `SDF_GEN_URL`
    /// replace the configured ones.
    pub fn apply_env(&mut self) {
        self.apply_env_from(|k| std::env::var(k).ok());
    }

    pub fn apply_env_from(&mut self, get: impl Fn(&str) -> Option<String>) {
        let b = &mut self.backends;
        for (key, slot) in [
            (ENV_EMBED_URL, &mut b.embed),
            (ENV_NLI_URL, &mut b.nli),
            (ENV_GEN_URL, &mut b.generate),
        ] {
            if let Some(url) = get(key).filter(|u| !u.is_empty()) {
                match slot {
                    Some(ep) => ep.url = url,
                    None => *slot = Some(EndpointConfig::new(url, "default", "unversioned")),
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let a = &self.augment;
        if !(a.qa_gen.enabled || a.caption_gen.enabled || a.scene_gen.enabled) {
            return Err(PipelineError::ConfigInvalid(
                "at least one augmentation family must be enabled".into(),
            ));
        }
        if !(self.theta_dup > 0.0 && self.theta_dup <= 1.0) {
            return Err(PipelineError::ConfigInvalid(format!(
                "theta_dup must be in (0, 1], got {}",
                self.theta_dup
            )));
        }
        if a.caption_gen.enabled && a.caption_gen.pairs_per_caption == 0 {
            return Err(PipelineError::ConfigInvalid("pairs_per_caption must be at least 1".into()));
        }
        if a.scene_gen.enabled && a.scene_gen.pairs_per_scene == 0 {
            return Err(PipelineError::ConfigInvalid("pairs_per_scene must be at least 1".into()));
        }
        if a.qa_gen.enabled && a.qa_gen.transforms.max_subs == 0 {
            return Err(PipelineError::ConfigInvalid("max_subs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.relevance.min_rel) {
            return Err(PipelineError::ConfigInvalid("min_rel must be in [0, 1]".into()));
        }
        if self.thresholds.file.is_some() && !self.thresholds.calibration_scores.is_empty() {
            return Err(PipelineError::ConfigInvalid(
                "give either a thresholds file or calibration scores, not both".into(),
            ));
        }
        if self.backends.kind == BackendKind::Reference && self.backends.reference.dimension < 8 {
            return Err(PipelineError::ConfigInvalid("reference dimension must be at least 8".into()));
        }
        if self.backends.kind == BackendKind::Http {
            let b = &self.backends;
            let need = |ep: &Option<EndpointConfig>, what: &str| match ep {
                Some(_) => Ok(()),
                None => Err(PipelineError::ConfigInvalid(format!("http backend has no `{what}` endpoint"))),
            };
            need(&b.embed, "embed")?;
            if b.embed.as_ref().and_then(|e| e.dimension).is_none() {
                return Err(PipelineError::ConfigInvalid("embed endpoint needs a dimension".into()));
            }
            if a.caption_gen.enabled {
                need(&b.nli, "nli")?;
            }
            if a.scene_gen.enabled {
                need(&b.generate, "generate")?;
            }
        }
        Ok(())
    }

    /// The manifest timestamp.
    pub fn timestamp(&self) -> String {
        self.timestamp_from(std::env::var("SOURCE_DATE_EPOCH").ok())
    }

    pub(crate) fn timestamp_from(&self, epoch: Option<String>) -> String {
        if let Some(t) = &self.created_at {
            return t.clone();
        }
        epoch
            .and_then(|s| s.trim().parse::<i64>().ok())
            .map(format_unix)
            .unwrap_or_else(|| "1970-01-01T00:00:00Z".into())
    }
}

/// RFC 3339 UTC rendering of a Unix timestamp.
fn format_unix(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    // Civil-from-days (proleptic Gregorian).
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        rem % 3600 / 60,
        rem % 60
    )
}
