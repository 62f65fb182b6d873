use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{
    augment_qa_record, caption_to_qa, fit_relevance, parse_caption, relevance::relevance_from_embeddings,
    scene_context, scene_to_qa, FitOptions, RelevanceWeights,
};
use crate::corpus::{
    compose_final, load_captions, load_qa, write_dataset, write_jsonl, CaptionRecord, DatasetManifest,
    Provenance, QARecord, SceneId,
};
use crate::quality::{
    gate, max_pool_similarity, render_hypothesis, semantic_dedup, GateDirection, QualityScores, RejectReason,
    RejectedRecord, Task,
};
use crate::rng::stream_rng;

use super::stats::{stats, FamilyFunnel, StatsReport};
use super::{read_json, read_jsonl, write_json_file, Pipeline, PipelineError, StageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Augment,
    Score,
    Gate,
    Dedup,
    Compose,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Augment,
        Stage::Score,
        Stage::Gate,
        Stage::Dedup,
        Stage::Compose,
        Stage::Stats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Augment => "augment",
            Stage::Score => "score",
            Stage::Gate => "gate",
            Stage::Dedup => "dedup",
            Stage::Compose => "compose",
            Stage::Stats => "stats",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// The gated task of a generated family.
pub fn task_for(p: Provenance) -> Task {
    match p {
        Provenance::CaptionGen => Task::Captioning,
        _ => Task::Qa,
    }
}

/// Source id embedded in an augmented id `{provenance}-{source}-{index}`.
pub fn source_of(id: &str, p: Provenance) -> Option<&str> {
    id.strip_prefix(p.as_str())?
        .strip_prefix('-')?
        .rsplit_once('-')
        .map(|(src, _)| src)
}

const GENERATED: [Provenance; 3] = [Provenance::QaGen, Provenance::CaptionGen, Provenance::SceneGen];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IngestMeta {
    skipped_qa: usize,
    skipped_captions: usize,
}

#[derive(Debug, Clone)]
struct Ingested {
    qa: Vec<QARecord>,
    captions: Vec<CaptionRecord>,
    meta: IngestMeta,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct FamilyCounts {
    candidates: usize,
    generated: usize,
    dropped: usize,
}

#[derive(Debug, Clone)]
struct Augmented {
    records: Vec<QARecord>,
    families: BTreeMap<Provenance, FamilyCounts>,
}

#[derive(Debug, Clone)]
struct Split {
    kept: Vec<QARecord>,
    rejected: Vec<RejectedRecord>,
}

#[derive(Serialize, Deserialize)]
struct Marker {
    stage: String,
    fingerprint: String,
}

/// Caption ids made unique by suffixing repeats with `#k`, so that derived
/// record ids never collide.
fn caption_sources(captions: &[CaptionRecord]) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    captions
        .iter()
        .map(|c| {
            let n = seen.entry(c.id.as_str()).or_insert(0);
            *n += 1;
            if *n == 1 {
                c.id.clone()
            } else {
                format!("{}#{}", c.id, *n - 1)
            }
        })
        .collect()
}

/// Keeps `target` records drawn without replacement, in input order.
fn cap(records: Vec<QARecord>, target: Option<usize>, seed: u64, family: Provenance) -> Vec<QARecord> {
    let Some(target) = target else { return records };
    if records.len() <= target {
        return records;
    }
    let mut rng = stream_rng(seed, "family_cap", family.as_str());
    let mut idx = sample(&mut rng, records.len(), target).into_vec();
    idx.sort_unstable();
    let mut keep = vec![false; records.len()];
    for i in idx {
        keep[i] = true;
    }
    records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

fn gate_score(r: &QARecord) -> Option<f64> {
    r.scores.as_ref().and_then(|s| task_for(r.provenance).score_of(s))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Pipeline {
    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.work_dir().join(stage.name())
    }

    /// Hash over everything that determines the outputs.
    fn base_fingerprint(&self) -> Result<String, StageError> {
        let mut h = Sha256::new();
        let mut cfg = self.cfg.clone();
        cfg.output_dir = PathBuf::new();
        h.update(serde_json::to_vec(&cfg).map_err(|e| StageError::Data(e.to_string()))?);
        h.update(serde_json::to_vec(&self.backends.stamps()).map_err(|e| StageError::Data(e.to_string()))?);
        h.update(serde_json::to_vec(&self.thresholds).map_err(|e| StageError::Data(e.to_string()))?);
        for p in [&self.cfg.inputs.qa, &self.cfg.inputs.captions] {
            match fs::read(p) {
                Ok(bytes) => h.update(Sha256::digest(&bytes)),
                Err(_) => h.update(b"missing"),
            }
        }
        Ok(format!("{:x}", h.finalize()))
    }

    fn fingerprint(&self, stage: Stage) -> Result<String, StageError> {
        let mut h = Sha256::new();
        h.update(self.base_fingerprint()?.as_bytes());
        h.update(stage.name().as_bytes());
        Ok(format!("{:x}", h.finalize()))
    }

    fn checkpoint_valid(&self, stage: Stage) -> bool {
        let marker: Result<Marker, _> = read_json(&self.stage_dir(stage).join("done.json"));
        match (marker, self.fingerprint(stage)) {
            (Ok(m), Ok(fp)) => m.fingerprint == fp,
            _ => false,
        }
    }

    fn begin(&self, stage: Stage) -> Result<PathBuf, StageError> {
        let dir = self.stage_dir(stage);
        let marker = dir.join("done.json");
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| crate::corpus::CorpusError::Io {
                path: marker.clone(),
                source: e,
            })?;
        }
        fs::create_dir_all(&dir).map_err(|e| crate::corpus::CorpusError::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }

    fn finish(&self, stage: Stage) -> Result<(), StageError> {
        write_json_file(
            &self.stage_dir(stage).join("done.json"),
            &Marker {
                stage: stage.name().into(),
                fingerprint: self.fingerprint(stage)?,
            },
        )
    }

    fn require(&self, stage: Stage) -> Result<PathBuf, StageError> {
        if self.checkpoint_valid(stage) {
            Ok(self.stage_dir(stage))
        } else {
            Err(StageError::MissingCheckpoint(stage.name()))
        }
    }

    // ---- ingest ----

    fn ingest(&self) -> Result<Ingested, StageError> {
        let strict = self.cfg.strict;
        let qa = load_qa(&self.cfg.inputs.qa, strict)?;
        let captions = load_captions(&self.cfg.inputs.captions, strict)?;
        let mut originals = Vec::with_capacity(qa.records.len());
        let mut skipped_qa = qa.skipped.len();
        for r in qa.records {
            if r.provenance == Provenance::Original {
                originals.push(r);
            } else if strict {
                return Err(StageError::Data(format!(
                    "input record `{}` has provenance {}; inputs must be original",
                    r.id, r.provenance
                )));
            } else {
                log::warn!("skipping non-original input record `{}`", r.id);
                skipped_qa += 1;
            }
        }
        Ok(Ingested {
            qa: originals,
            captions: captions.records,
            meta: IngestMeta {
                skipped_qa,
                skipped_captions: captions.skipped.len(),
            },
        })
    }

    fn save_ingest(&self, d: &Ingested) -> Result<(), StageError> {
        let dir = self.begin(Stage::Ingest)?;
        write_jsonl(&dir.join("qa.jsonl"), &d.qa)?;
        write_jsonl(&dir.join("captions.jsonl"), &d.captions)?;
        write_json_file(&dir.join("meta.json"), &d.meta)?;
        self.finish(Stage::Ingest)
    }

    fn load_ingest(&self) -> Result<Ingested, StageError> {
        let dir = self.require(Stage::Ingest)?;
        Ok(Ingested {
            qa: read_jsonl(&dir.join("qa.jsonl"))?,
            captions: read_jsonl(&dir.join("captions.jsonl"))?,
            meta: read_json(&dir.join("meta.json"))?,
        })
    }

    // ---- augment ----

    fn augment(&self, input: &Ingested) -> Result<Augmented, StageError> {
        let seed = self.cfg.seed;
        let a = &self.cfg.augment;
        let res = &self.resources;
        let mut records = Vec::new();
        let mut families = BTreeMap::new();

        if a.qa_gen.enabled {
            let all: Vec<QARecord> = input
                .qa
                .par_iter()
                .map(|q| augment_qa_record(q, &res.synonyms, &res.antonyms, &a.qa_gen.transforms, seed))
                .collect::<Vec<_>>()
                .concat();
            let candidates = all.len();
            let kept = cap(all, a.qa_gen.target, seed, Provenance::QaGen);
            families.insert(
                Provenance::QaGen,
                FamilyCounts {
                    candidates,
                    generated: kept.len(),
                    dropped: 0,
                },
            );
            records.extend(kept);
        }

        if a.caption_gen.enabled {
            let sources = caption_sources(&input.captions);
            let per_caption = a.caption_gen.pairs_per_caption;
            let all: Vec<QARecord> = input
                .captions
                .par_iter()
                .zip(sources.par_iter())
                .map(|(c, src)| {
                    let facts = parse_caption(c, &res.lexicons);
                    let mut keyed = c.clone();
                    keyed.id = src.clone();
                    let pairs = caption_to_qa(&keyed, &res.templates, &facts);
                    if pairs.len() <= per_caption {
                        return pairs;
                    }
                    let mut rng = stream_rng(seed, "caption_pairs", src);
                    let mut idx = sample(&mut rng, pairs.len(), per_caption).into_vec();
                    idx.sort_unstable();
                    idx.into_iter().map(|i| pairs[i].clone()).collect()
                })
                .collect::<Vec<_>>()
                .concat();
            let candidates = all.len();
            let kept = cap(all, a.caption_gen.target, seed, Provenance::CaptionGen);
            families.insert(
                Provenance::CaptionGen,
                FamilyCounts {
                    candidates,
                    generated: kept.len(),
                    dropped: 0,
                },
            );
            records.extend(kept);
        }

        if a.scene_gen.enabled {
            let mut scenes: BTreeMap<&SceneId, Vec<&CaptionRecord>> = BTreeMap::new();
            for c in &input.captions {
                scenes.entry(&c.scene_id).or_default().push(c);
            }
            let k = a.scene_gen.pairs_per_scene;
            let generator = self.backends.generator.as_ref();
            let outputs = scenes
                .into_par_iter()
                .map(|(scene, caps)| scene_to_qa(scene, &scene_context(&caps), generator, k))
                .collect::<Result<Vec<_>, _>>()?;
            let dropped = outputs.iter().map(|o| o.dropped).sum();
            let all: Vec<QARecord> = outputs.into_iter().flat_map(|o| o.records).collect();
            let candidates = all.len();
            let kept = cap(all, a.scene_gen.target, seed, Provenance::SceneGen);
            families.insert(
                Provenance::SceneGen,
                FamilyCounts {
                    candidates,
                    generated: kept.len(),
                    dropped,
                },
            );
            records.extend(kept);
        }
        Ok(Augmented { records, families })
    }

    fn save_augment(&self, d: &Augmented) -> Result<(), StageError> {
        let dir = self.begin(Stage::Augment)?;
        write_jsonl(&dir.join("generated.jsonl"), &d.records)?;
        write_json_file(&dir.join("meta.json"), &d.families)?;
        self.finish(Stage::Augment)
    }

    fn load_augment(&self) -> Result<Augmented, StageError> {
        let dir = self.require(Stage::Augment)?;
        Ok(Augmented {
            records: read_jsonl(&dir.join("generated.jsonl"))?,
            families: read_json(&dir.join("meta.json"))?,
        })
    }

    // ---- score ----

    fn relevance_weights(&self, originals: &[QARecord]) -> Result<Option<RelevanceWeights>, StageError> {
        let rc = &self.cfg.relevance;
        if let Some(path) = &rc.weights {
            return Ok(Some(RelevanceWeights::load(path)?));
        }
        if !rc.fit {
            return Ok(None);
        }
        let opts = FitOptions {
            seed: self.cfg.seed,
            ..FitOptions::default()
        };
        let w = fit_relevance(originals, self.backends.embedder.as_ref(), &opts)?;
        w.save(&self.stage_dir(Stage::Score).join("relevance_weights.json"))?;
        Ok(Some(w))
    }

    fn score(&self, ingested: &Ingested, augmented: &Augmented) -> Result<Vec<QARecord>, StageError> {
        let embedder = self.backends.embedder.as_ref();
        let mut records = augmented.records.clone();
        if records.is_empty() {
            return Ok(records);
        }
        let embed = |texts: Vec<String>| -> Result<Vec<Vec<f64>>, StageError> {
            if texts.is_empty() {
                Ok(Vec::new())
            } else {
                Ok(embedder.embed_batch(&texts)?)
            }
        };

        let question_vecs = embed(records.iter().map(|r| r.question.clone()).collect())?;
        let needs_pool = records.iter().any(|r| task_for(r.provenance) == Task::Qa);
        let mut pools: HashMap<&SceneId, Vec<Vec<f64>>> = HashMap::new();
        if needs_pool {
            let original_vecs = embed(ingested.qa.iter().map(|r| r.question.clone()).collect())?;
            for (r, v) in ingested.qa.iter().zip(original_vecs) {
                pools.entry(&r.scene_id).or_default().push(v);
            }
        }
        let s_q: Vec<Option<f64>> = records
            .par_iter()
            .zip(question_vecs.par_iter())
            .map(|(r, v)| {
                (task_for(r.provenance) == Task::Qa)
                    .then(|| max_pool_similarity(v, pools.get(&r.scene_id).map_or(&[][..], Vec::as_slice)))
            })
            .collect();

        // Caption consistency: one NLI batch over every caption-derived pair,
        // averaged per source caption.
        let sources = caption_sources(&ingested.captions);
        let by_source: HashMap<&str, &CaptionRecord> =
            sources.iter().map(String::as_str).zip(&ingested.captions).collect();
        let mut pair_idx = Vec::new();
        let mut pairs = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if r.provenance != Provenance::CaptionGen {
                continue;
            }
            let caption = source_of(&r.id, r.provenance)
                .and_then(|s| by_source.get(s))
                .ok_or_else(|| StageError::Data(format!("no source caption for `{}`", r.id)))?;
            let answer = r.answers.first().map(String::as_str).unwrap_or("");
            pairs.push((caption.description.clone(), render_hypothesis(&r.question, answer)));
            pair_idx.push(i);
        }
        let mut s_cap: Vec<Option<f64>> = vec![None; records.len()];
        if !pairs.is_empty() {
            let nli = self.backends.nli.entailment_batch(&pairs)?;
            if nli.len() != pairs.len() {
                return Err(StageError::Data("NLI backend returned a misaligned batch".into()));
            }
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (k, &i) in pair_idx.iter().enumerate() {
                let src = source_of(&records[i].id, Provenance::CaptionGen).unwrap_or("");
                groups.entry(src).or_default().push(k);
            }
            for ks in groups.values() {
                let m = ks.iter().map(|&k| nli[k]).sum::<f64>() / ks.len() as f64;
                for &k in ks {
                    s_cap[pair_idx[k]] = Some(m);
                }
            }
        }

        let rel: Vec<Option<f64>> = match self.relevance_weights(&ingested.qa)? {
            None => vec![None; records.len()],
            Some(w) => {
                let answer_vecs = embed(
                    records
                        .iter()
                        .map(|r| r.answers.first().cloned().unwrap_or_default())
                        .collect(),
                )?;
                answer_vecs
                    .iter()
                    .zip(&question_vecs)
                    .map(|(a, q)| relevance_from_embeddings(a, q, &w).map(Some))
                    .collect::<Result<_, _>>()?
            }
        };

        for (i, r) in records.iter_mut().enumerate() {
            r.scores = Some(QualityScores {
                s_q: s_q[i],
                s_cap: s_cap[i],
                rel: rel[i],
            });
        }
        Ok(records)
    }

    fn save_score(&self, records: &[QARecord]) -> Result<(), StageError> {
        let dir = self.stage_dir(Stage::Score);
        write_jsonl(&dir.join("scored.jsonl"), records)?;
        self.finish(Stage::Score)
    }

    fn load_score(&self) -> Result<Vec<QARecord>, StageError> {
        let dir = self.require(Stage::Score)?;
        read_jsonl(&dir.join("scored.jsonl"))
    }

    // ---- gate ----

    fn gate(&self, scored: Vec<QARecord>) -> Result<Split, StageError> {
        let min_rel = self.cfg.relevance.min_rel;
        let direction = self.cfg.thresholds.direction;
        let mut by_family: BTreeMap<Provenance, Vec<QARecord>> = BTreeMap::new();
        let mut rejected = Vec::new();
        for r in scored {
            match r.scores.and_then(|s| s.rel) {
                Some(rel) if rel < min_rel => rejected.push(RejectedRecord {
                    reason: RejectReason::LowRelevance,
                    stage: Stage::Gate.name().into(),
                    detail: Some(format!("rel={rel:.4} < min_rel={min_rel}")),
                    record: r,
                }),
                _ => by_family.entry(r.provenance).or_default().push(r),
            }
        }
        let mut kept = Vec::new();
        for family in GENERATED {
            let Some(records) = by_family.remove(&family) else { continue };
            let task = task_for(family);
            let tau = self.thresholds.tau(task);
            let (k, rej) = gate(records, &self.thresholds, task, direction)?;
            kept.extend(k);
            rejected.extend(rej.into_iter().map(|r| {
                let s = gate_score(&r).unwrap_or(f64::NAN);
                let (reason, op) = match direction {
                    GateDirection::KeepAbove => (RejectReason::BelowThreshold, "<"),
                    GateDirection::KeepBelow => (RejectReason::AboveThreshold, ">"),
                };
                RejectedRecord {
                    reason,
                    stage: Stage::Gate.name().into(),
                    detail: Some(format!("{task} score {s:.4} {op} tau={tau}")),
                    record: r,
                }
            }));
        }
        if let Some(p) = by_family.keys().next() {
            return Err(StageError::Data(format!("unexpected {p} record in the generated set")));
        }
        Ok(Split { kept, rejected })
    }

    fn save_split(&self, stage: Stage, s: &Split) -> Result<(), StageError> {
        let dir = self.begin(stage)?;
        write_jsonl(&dir.join("kept.jsonl"), &s.kept)?;
        write_jsonl(&dir.join("rejected.jsonl"), &s.rejected)?;
        self.finish(stage)
    }

    fn load_split(&self, stage: Stage) -> Result<Split, StageError> {
        let dir = self.require(stage)?;
        Ok(Split {
            kept: read_jsonl(&dir.join("kept.jsonl"))?,
            rejected: read_jsonl(&dir.join("rejected.jsonl"))?,
        })
    }

    // ---- dedup ----

    fn dedup(&self, gated: &Split) -> Result<Split, StageError> {
        if gated.kept.is_empty() {
            return Ok(Split {
                kept: Vec::new(),
                rejected: Vec::new(),
            });
        }
        let (kept, dups) = semantic_dedup(gated.kept.clone(), self.backends.embedder.as_ref(), self.cfg.theta_dup)?;
        let rejected = dups
            .into_iter()
            .map(|d| RejectedRecord {
                reason: RejectReason::Duplicate,
                stage: Stage::Dedup.name().into(),
                detail: Some(format!("of {} (cos={:.4})", d.of, d.similarity)),
                record: d.record,
            })
            .collect();
        Ok(Split { kept, rejected })
    }

    // ---- compose ----

    fn manifest_settings(&self) -> BTreeMap<String, serde_json::Value> {
        use serde_json::json;
        let a = &self.cfg.augment;
        let mut s = BTreeMap::new();
        s.insert("theta_dup".into(), json!(self.cfg.theta_dup));
        s.insert("gate_direction".into(), json!(self.cfg.thresholds.direction));
        s.insert("strict".into(), json!(self.cfg.strict));
        s.insert(
            "families".into(),
            json!({
                "qa_gen": {"enabled": a.qa_gen.enabled, "target": a.qa_gen.target},
                "caption_gen": {
                    "enabled": a.caption_gen.enabled,
                    "target": a.caption_gen.target,
                    "pairs_per_caption": a.caption_gen.pairs_per_caption,
                },
                "scene_gen": {
                    "enabled": a.scene_gen.enabled,
                    "target": a.scene_gen.target,
                    "pairs_per_scene": a.scene_gen.pairs_per_scene,
                },
            }),
        );
        if self.cfg.relevance.active() {
            s.insert("min_rel".into(), json!(self.cfg.relevance.min_rel));
        }
        s
    }

    fn compose(
        &self,
        ingested: &Ingested,
        augmented: &Augmented,
        gated: &Split,
        deduped: &Split,
    ) -> Result<(Vec<QARecord>, DatasetManifest), StageError> {
        let mut partitions = vec![(Provenance::Original, ingested.qa.clone())];
        for family in GENERATED {
            let recs: Vec<QARecord> = deduped.kept.iter().filter(|r| r.provenance == family).cloned().collect();
            partitions.push((family, recs));
        }
        let mut manifest = DatasetManifest::new(self.cfg.seed, self.thresholds.clone(), self.cfg.timestamp());
        manifest.gross_counts.insert(Provenance::Original, ingested.qa.len());
        for (p, c) in &augmented.families {
            manifest.gross_counts.insert(*p, c.generated);
        }
        manifest.backends = self.backends.stamps();
        manifest.settings = self.manifest_settings();
        let (records, manifest) = compose_final(partitions, manifest)?;

        let out = &self.cfg.output_dir;
        write_dataset(&records, &manifest, out)?;
        let rejected: Vec<&RejectedRecord> = gated.rejected.iter().chain(&deduped.rejected).collect();
        write_jsonl(&out.join("rejected.jsonl"), &rejected)?;
        Ok((records, manifest))
    }

    fn load_compose(&self) -> Result<(Vec<QARecord>, DatasetManifest), StageError> {
        self.require(Stage::Compose)?;
        let out = &self.cfg.output_dir;
        Ok((read_jsonl(&out.join("dataset.jsonl"))?, read_json(&out.join("manifest.json"))?))
    }

    // ---- stats ----

    fn stats(
        &self,
        dataset: &[QARecord],
        augmented: &Augmented,
        scored: &[QARecord],
        gated: &Split,
        deduped: &Split,
    ) -> Result<StatsReport, StageError> {
        let mut report = stats(dataset);
        for (family, counts) in &augmented.families {
            let of = |r: &&QARecord| r.provenance == *family;
            let rejected_by = |reason: RejectReason| {
                gated
                    .rejected
                    .iter()
                    .chain(&deduped.rejected)
                    .filter(|x| x.reason == reason && x.record.provenance == *family)
                    .count()
            };
            let kept: Vec<&QARecord> = deduped.kept.iter().filter(of).collect();
            report.augmentation.insert(
                *family,
                FamilyFunnel {
                    candidates: counts.candidates,
                    generated: counts.generated,
                    rejected_low_relevance: rejected_by(RejectReason::LowRelevance),
                    rejected_threshold: rejected_by(RejectReason::BelowThreshold)
                        + rejected_by(RejectReason::AboveThreshold),
                    duplicates: rejected_by(RejectReason::Duplicate),
                    kept: kept.len(),
                    mean_score_generated: mean(scored.iter().filter(of).filter_map(gate_score)),
                    mean_score_kept: mean(kept.iter().filter_map(|r| gate_score(r))),
                    dropped: counts.dropped,
                },
            );
        }
        write_json_file(&self.cfg.output_dir.join("stats.json"), &report)?;
        Ok(report)
    }

    fn load_stats(&self) -> Result<StatsReport, StageError> {
        self.require(Stage::Stats)?;
        read_json(&self.cfg.output_dir.join("stats.json"))
    }

    // ---- drivers ----

    /// Runs every stage in order, reusing valid checkpoints when resuming.
    /// Writes `dataset.jsonl`, `manifest.json`, `rejected.jsonl` and
    /// `stats.json` into the output directory.
    pub fn run(&self) -> Result<DatasetManifest, PipelineError> {
        Ok(self.run_full()?.0)
    }

    /// As [`Pipeline::run`], also returning the statistics report.
    pub fn run_full(&self) -> Result<(DatasetManifest, StatsReport), PipelineError> {
        let mut fresh = !self.resume;
        let mut reuse = |stage: Stage| {
            let ok = !fresh && self.checkpoint_valid(stage);
            if ok {
                log::info!("{}: reusing checkpoint", stage.name());
            } else {
                log::info!("{}: running", stage.name());
                fresh = true;
            }
            ok
        };
        let at = |s: Stage| move |e: StageError| e.at(s.name());

        let ingested = if reuse(Stage::Ingest) {
            self.load_ingest().map_err(at(Stage::Ingest))?
        } else {
            let d = self.ingest().map_err(at(Stage::Ingest))?;
            self.save_ingest(&d).map_err(at(Stage::Ingest))?;
            d
        };
        let augmented = if reuse(Stage::Augment) {
            self.load_augment().map_err(at(Stage::Augment))?
        } else {
            let d = self.augment(&ingested).map_err(at(Stage::Augment))?;
            self.save_augment(&d).map_err(at(Stage::Augment))?;
            d
        };
        let scored = if reuse(Stage::Score) {
            self.load_score().map_err(at(Stage::Score))?
        } else {
            self.begin(Stage::Score).map_err(at(Stage::Score))?;
            let d = self.score(&ingested, &augmented).map_err(at(Stage::Score))?;
            self.save_score(&d).map_err(at(Stage::Score))?;
            d
        };
        let gated = if reuse(Stage::Gate) {
            self.load_split(Stage::Gate).map_err(at(Stage::Gate))?
        } else {
            let d = self.gate(scored.clone()).map_err(at(Stage::Gate))?;
            self.save_split(Stage::Gate, &d).map_err(at(Stage::Gate))?;
            d
        };
        let deduped = if reuse(Stage::Dedup) {
            self.load_split(Stage::Dedup).map_err(at(Stage::Dedup))?
        } else {
            let d = self.dedup(&gated).map_err(at(Stage::Dedup))?;
            self.save_split(Stage::Dedup, &d).map_err(at(Stage::Dedup))?;
            d
        };
        let (dataset, manifest) = if reuse(Stage::Compose) {
            self.load_compose().map_err(at(Stage::Compose))?
        } else {
            self.begin(Stage::Compose).map_err(at(Stage::Compose))?;
            let d = self
                .compose(&ingested, &augmented, &gated, &deduped)
                .map_err(at(Stage::Compose))?;
            self.finish(Stage::Compose).map_err(at(Stage::Compose))?;
            d
        };
        let report = if reuse(Stage::Stats) {
            self.load_stats().map_err(at(Stage::Stats))?
        } else {
            self.begin(Stage::Stats).map_err(at(Stage::Stats))?;
            let r = self
                .stats(&dataset, &augmented, &scored, &gated, &deduped)
                .map_err(at(Stage::Stats))?;
            self.finish(Stage::Stats).map_err(at(Stage::Stats))?;
            r
        };
        Ok((manifest, report))
    }

    /// Runs one stage from the checkpoints of the stages before it.
    pub fn run_stage(&self, stage: Stage) -> Result<(), PipelineError> {
        let name = stage.name();
        let go = || -> Result<(), StageError> {
            match stage {
                Stage::Ingest => {
                    let d = self.ingest()?;
                    self.save_ingest(&d)
                }
                Stage::Augment => {
                    let i = self.load_ingest()?;
                    let d = self.augment(&i)?;
                    self.save_augment(&d)
                }
                Stage::Score => {
                    let i = self.load_ingest()?;
                    let a = self.load_augment()?;
                    self.begin(Stage::Score)?;
                    let d = self.score(&i, &a)?;
                    self.save_score(&d)
                }
                Stage::Gate => {
                    let s = self.load_score()?;
                    let d = self.gate(s)?;
                    self.save_split(Stage::Gate, &d)
                }
                Stage::Dedup => {
                    let g = self.load_split(Stage::Gate)?;
                    let d = self.dedup(&g)?;
                    self.save_split(Stage::Dedup, &d)
                }
                Stage::Compose => {
                    let i = self.load_ingest()?;
                    let a = self.load_augment()?;
                    let g = self.load_split(Stage::Gate)?;
                    let d = self.load_split(Stage::Dedup)?;
                    self.begin(Stage::Compose)?;
                    self.compose(&i, &a, &g, &d)?;
                    self.finish(Stage::Compose)
                }
                Stage::Stats => {
                    let a = self.load_augment()?;
                    let s = self.load_score()?;
                    let g = self.load_split(Stage::Gate)?;
                    let d = self.load_split(Stage::Dedup)?;
                    let (dataset, _) = self.load_compose()?;
                    self.begin(Stage::Stats)?;
                    self.stats(&dataset, &a, &s, &g, &d)?;
                    self.finish(Stage::Stats)
                }
            }
        };
        go().map_err(|e| e.at(name))
    }
}

/// Convenience wrapper: build the pipeline from `config` and run it.
pub fn run(config: super::PipelineConfig) -> Result<DatasetManifest, PipelineError> {
    Pipeline::new(config)?.run()
}

/// Reads a dataset file for `stats`.
pub fn dataset_stats(path: &Path) -> Result<StatsReport, PipelineError> {
    let records: Vec<QARecord> = read_jsonl(path).map_err(|e| e.at("stats"))?;
    Ok(stats(&records))
}
