//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::oracle::{self, Item, VOCAB};
use rand::Rng;
use sdf_core::augment::{
    augment_qa_record, caption_to_qa, default_templates, logical_reverse, parse_caption, synonym_replace, Lexicons,
    QaTransformOptions, Thesaurus,
};
use sdf_core::backends::{cosine, EmbeddingBackend, ReferenceEmbedder};
use sdf_core::corpus::{Provenance, QARecord, SceneId};
use sdf_core::metrics::{
    bleu, cider, gated_metric, iou3d, meteor, meteor_sentence, rouge_l, rouge_l_sentence, Box3D, Candidate,
    MetricKind, ReferenceSet,
};
use sdf_core::pipeline::{classify_question, stats, Pipeline, PipelineConfig, QuestionCategory, StatsReport};
use sdf_core::quality::{calibrate_threshold, gate, semantic_dedup, GateDirection, QualityScores, Task, ThresholdSet};
use sdf_core::rng::stream_rng;
use sdf_core::text::tokenize;

type Check = Result<(), String>;

/// Candidate and ground-truth boxes as (center, dims).
type BoxPair = (([f64; 3], [f64; 3]), ([f64; 3], [f64; 3]));

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

// ---- metrics ----

fn sentence(rng: &mut impl Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| VOCAB[rng.gen_range(0..VOCAB.len())].0.to_string()).collect()
}

fn synthetic_corpus(seed: u64) -> (Vec<Item>, Vec<BoxPair>) {
    let mut rng = stream_rng(seed, "acceptance", "metrics");
    let mut items = vec![];
    let mut boxes = vec![];
    for _ in 0..20 {
        let cand = sentence(&mut rng, 10);
        let n_refs = rng.gen_range(1..=4);
        let refs = (0..n_refs).map(|_| sentence(&mut rng, 12)).collect();
        items.push(Item { cand, refs });
        let mut b = || {
            (
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)],
            )
        };
        boxes.push((b(), b()));
    }
    (items, boxes)
}

fn to_crate(items: &[Item], boxes: &[BoxPair]) -> (Vec<Candidate>, Vec<ReferenceSet>) {
    items
        .iter()
        .zip(boxes)
        .enumerate()
        .map(|(i, (it, (pb, gb)))| {
            let id = format!("i{i}");
            let mut c = Candidate::new(&id, it.cand.clone());
            let mut r = ReferenceSet::new(&id, it.refs.clone());
            c.bbox = Some(Box3D::new(pb.0, pb.1));
            r.bbox = Some(Box3D::new(gb.0, gb.1));
            (c, r)
        })
        .unzip()
}

fn single(cand: &str, refs: &[&str]) -> (Vec<Candidate>, Vec<ReferenceSet>) {
    (
        vec![Candidate::new("x", toks(cand))],
        vec![ReferenceSet::new("x", refs.iter().map(|r| toks(r)).collect())],
    )
}

fn metric_oracle_equivalence() -> Check {
    let start = Instant::now();
    for seed in 0..20 {
        let (items, boxes) = synthetic_corpus(seed);
        let (c, r) = to_crate(&items, &boxes);
        for n in 1..=4 {
            let (got, want) = (bleu(&c, &r, n).unwrap(), oracle::bleu(&items, n, None));
            ensure(close(got, want, 1e-9), || format!("seed {seed} BLEU-{n}: {got} vs {want}"))?;
        }
        let rouge: Vec<f64> = items.iter().map(oracle::rouge_l_item).collect();
        let met: Vec<f64> = items.iter().map(oracle::meteor_item).collect();
        let cid = oracle::cider_items(&items);
        for (k, it) in items.iter().enumerate() {
            ensure(close(rouge_l_sentence(&it.cand, &it.refs), rouge[k], 1e-9), || format!("seed {seed} ROUGE-L item {k}"))?;
            ensure(close(meteor_sentence(&it.cand, &it.refs), met[k], 1e-9), || format!("seed {seed} METEOR item {k}"))?;
        }
        let pairs = [
            ("ROUGE-L", rouge_l(&c, &r).unwrap(), oracle::masked_mean(&rouge, None), 1e-9),
            ("METEOR", meteor(&c, &r).unwrap(), oracle::masked_mean(&met, None), 1e-9),
            ("CIDEr", cider(&c, &r).unwrap(), oracle::masked_mean(&cid, None), 1e-6),
        ];
        for (name, got, want, tol) in pairs {
            ensure(close(got, want, tol), || format!("seed {seed} {name}: {got} vs {want}"))?;
        }
        let mask: Vec<bool> = boxes.iter().map(|(a, b)| oracle::iou(*a, *b) >= 0.25).collect();
        let (got, want) = (
            gated_metric(&c, &r, 0.25, MetricKind::Cider).unwrap(),
            oracle::masked_mean(&cid, Some(&mask)),
        );
        ensure(close(got, want, 1e-6), || format!("seed {seed} gated CIDEr: {got} vs {want}"))?;
    }

    // Hand-derived cases, exact.
    let (c, r) = single("the the the the", &["the cat sat down"]);
    let b1 = bleu(&c, &r, 1).unwrap();
    ensure(b1 == 0.25, || format!("BLEU-1 clipped case = {b1}"))?;
    let (c, r) = single("a b c d", &["a c d e"]);
    let rl = rouge_l(&c, &r).unwrap();
    ensure(rl == 0.75, || format!("ROUGE-L case = {rl}"))?;
    for m in 1..=8usize {
        let s: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
        let got = meteor_sentence(&s, std::slice::from_ref(&s));
        let want = 1.0 - 0.5 / (m as f64).powi(3);
        ensure(got == want, || format!("METEOR identical m={m}: {got} vs {want}"))?;
    }
    let (x, y) = ("the red chair is here", "a blue lamp stands there");
    let c = vec![Candidate::new("a", toks(x)), Candidate::new("b", toks(y))];
    let r = vec![ReferenceSet::new("a", vec![toks(x)]), ReferenceSet::new("b", vec![toks(y)])];
    let cd = cider(&c, &r).unwrap();
    ensure(cd == 10.0, || format!("CIDEr disjoint vocabularies = {cd}"))?;
    let v = iou3d(&Box3D::new([0.0; 3], [1.0; 3]), &Box3D::new([0.5, 0.0, 0.0], [1.0; 3]));
    ensure(v == 1.0 / 3.0, || format!("IoU half-offset cubes = {v}"))?;

    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))
}

// ---- calibration ----

fn threshold_calibration() -> Check {
    let e = calibrate_threshold(&[0.7, 0.9], Task::Qa).map_err(|e| e.to_string())?;
    ensure(close(e.mu, 0.8, 1e-12) && close(e.sigma, 0.1, 1e-12) && close(e.tau, 0.996, 1e-12), || {
        format!("{{0.7, 0.9}} -> mu {} sigma {} tau {}", e.mu, e.sigma, e.tau)
    })?;
    let z = calibrate_threshold(&[0.6, 0.6, 0.6, 0.6], Task::Captioning).map_err(|e| e.to_string())?;
    ensure(z.tau == z.mu && z.sigma == 0.0, || format!("zero variance -> {z:?}"))?;

    // Score sets built to land on the default thresholds.
    for (task, target) in [(Task::Qa, 0.82), (Task::Captioning, 0.77)] {
        let sigma = 0.05;
        let mu = target - 1.96 * sigma;
        let e = calibrate_threshold(&[mu - sigma, mu + sigma], task).map_err(|e| e.to_string())?;
        ensure(close(e.tau, target, 1e-12), || format!("{task:?}: constructed tau {} vs {target}", e.tau))?;
    }
    let mut rng = stream_rng(0, "acceptance", "calibration");
    for trial in 0..1000 {
        let n = rng.gen_range(2..50);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = calibrate_threshold(&xs, Task::Qa).map_err(|e| e.to_string())?;
        let residual = e.tau - e.mu - 1.96 * e.sigma;
        ensure(residual.abs() <= 1e-12, || format!("trial {trial}: residual {residual}"))?;
    }
    let d = ThresholdSet::fixed_default();
    ensure((d.tau(Task::Qa), d.tau(Task::Captioning)) == (0.82, 0.77), || format!("defaults {d:?}"))?;
    ensure(ThresholdSet::calibrated(&[]) == d, || "skipped calibration changed the defaults".into())
}

// ---- gate and dedup ----

fn scored(i: usize, s_q: f64, s_cap: f64) -> QARecord {
    QARecord {
        id: format!("r{i:04}"),
        scene_id: SceneId::new("scene0000_00", true).unwrap(),
        question: format!("question {i}"),
        answers: vec!["x".into()],
        object_ids: vec![],
        provenance: Provenance::QaGen,
        scores: Some(QualityScores { s_q: Some(s_q), s_cap: Some(s_cap), rel: None }),
    }
}

fn ids(rs: &[QARecord]) -> Vec<String> {
    rs.iter().map(|r| r.id.clone()).collect()
}

fn gate_properties() -> Check {
    let mut rng = stream_rng(0, "acceptance", "gate");
    for trial in 0..20 {
        let records: Vec<QARecord> = (0..1000).map(|i| scored(i, rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
        let task = if trial % 2 == 0 { Task::Qa } else { Task::Captioning };
        let t1 = rng.gen_range(0.0..1.0);
        let t2 = t1 + rng.gen_range(0.0..0.3);
        let at = |t: f64| {
            let mut s = ThresholdSet::fixed_default();
            s.tau_qa = t;
            s.tau_cap = t;
            s
        };
        let run = |rs: Vec<QARecord>, t: f64| gate(rs, &at(t), task, GateDirection::KeepAbove).map_err(|e| e.to_string());
        let (k1, r1) = run(records.clone(), t1)?;
        let (k2, _) = run(records.clone(), t2)?;
        let score = |r: &QARecord| task.score_of(r.scores.as_ref().unwrap()).unwrap();

        ensure(k1.len() + r1.len() == records.len(), || format!("trial {trial}: sizes"))?;
        ensure(k1.iter().all(|r| score(r) >= t1) && r1.iter().all(|r| score(r) < t1), || {
            format!("trial {trial}: threshold rule")
        })?;
        let sorted = |v: &[QARecord]| ids(v).windows(2).all(|w| w[0] < w[1]);
        ensure(sorted(&k1) && sorted(&r1), || format!("trial {trial}: order not preserved"))?;
        let k1_ids = ids(&k1);
        ensure(ids(&k2).iter().all(|id| k1_ids.contains(id)), || format!("trial {trial}: not monotone"))?;
        let (again, none) = run(k1.clone(), t1)?;
        ensure(ids(&again) == k1_ids && none.is_empty(), || format!("trial {trial}: not idempotent"))?;
    }

    // Dedup against the all-pairs oracle over 200 generated questions.
    let emb = ReferenceEmbedder::default();
    for seed in 0..5 {
        let mut records = common::qa(seed, 200, 10);
        for r in &mut records {
            r.provenance = Provenance::QaGen;
        }
        let texts: Vec<String> = records.iter().map(|r| r.question.clone()).collect();
        let vectors = emb.embed_batch(&texts).map_err(|e| e.to_string())?;
        let n = vectors.len();
        let sim: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cosine(&vectors[i], &vectors[j])).collect()).collect();
        for theta in [0.8, 0.9, 0.95, 1.0] {
            let mut expect: Vec<Option<usize>> = vec![None; n];
            for i in 0..n {
                expect[i] = (0..i).find(|&j| expect[j].is_none() && sim[i][j] >= theta);
            }
            let (kept, dups) = semantic_dedup(records.clone(), &emb, theta).map_err(|e| e.to_string())?;
            let want_kept: Vec<String> = (0..n).filter(|&i| expect[i].is_none()).map(|i| records[i].id.clone()).collect();
            ensure(ids(&kept) == want_kept, || format!("seed {seed} theta {theta}: kept set differs"))?;
            let want_of: HashMap<String, String> = (0..n)
                .filter_map(|i| expect[i].map(|j| (records[i].id.clone(), records[j].id.clone())))
                .collect();
            let got_of: HashMap<String, String> = dups.iter().map(|d| (d.record.id.clone(), d.of.clone())).collect();
            ensure(got_of == want_of, || format!("seed {seed} theta {theta}: duplicate links differ"))?;
        }
    }
    Ok(())
}

// ---- augmentation ----

fn token_counts(text: &str) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for t in tokenize(text) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

fn augmentation_invariants() -> Check {
    let syn = Thesaurus::default_synonyms();
    let ant = Thesaurus::default_antonyms();
    let opts = QaTransformOptions::default();

    let mut synonyms = 0;
    let mut reversals = 0;
    for seed in 0..10 {
        for q in common::qa(seed, 100, 10) {
            for v in synonym_replace(&q, &syn, seed, 2, 3) {
                synonyms += 1;
                ensure(v.answers == q.answers, || format!("{}: answers changed", v.id))?;
                let (before, after) = (token_counts(&q.question), token_counts(&v.question));
                for t in q.answers.iter().flat_map(|a| tokenize(a)) {
                    let n = before.get(&t).copied().unwrap_or(0);
                    ensure(after.get(&t).copied().unwrap_or(0) >= n, || format!("{}: lost `{t}`", v.id))?;
                }
            }
            if let Some(r) = logical_reverse(&q, &ant) {
                reversals += 1;
                let back = logical_reverse(&r, &ant).ok_or_else(|| format!("{}: reversal not reversible", q.id))?;
                ensure(back.question == q.question && back.answers == q.answers, || format!("{}: not an involution", q.id))?;
            }
        }
    }
    ensure(synonyms >= 500, || format!("only {synonyms} synonym variants"))?;
    ensure(reversals > 0, || "no reversible questions".into())?;

    let templates = default_templates();
    let lex = Lexicons::default();
    let slot = regex::Regex::new(r"\{[a-z_]+\}").unwrap();
    let mut emitted = 0;
    for seed in 0..5 {
        for c in common::captions(seed, 100, 10) {
            for q in caption_to_qa(&c, &templates, &parse_caption(&c, &lex)) {
                emitted += 1;
                let text = std::iter::once(&q.question).chain(&q.answers);
                ensure(text.into_iter().all(|t| !slot.is_match(t)), || format!("unfilled slot in {}", q.id))?;
            }
        }
    }
    ensure(emitted >= 500, || format!("only {emitted} caption QA pairs"))?;

    let render = || -> String {
        common::qa(21, 400, 10)
            .iter()
            .flat_map(|q| augment_qa_record(q, &syn, &ant, &opts, 21))
            .map(|v| serde_json::to_string(&v).unwrap() + "\n")
            .collect()
    };
    let (a, b) = (render(), render());
    ensure(a.lines().count() >= 500, || format!("only {} variants", a.lines().count()))?;
    ensure(a == b, || "two seeded runs differ".into())
}

// ---- pipeline ----

fn desk_config(dir: &Path, out: &str, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(dir.join("qa.jsonl"), dir.join("captions.jsonl"), dir.join(out));
    cfg.seed = seed;
    cfg.augment.qa_gen.target = Some(30);
    cfg.augment.caption_gen.target = Some(30);
    cfg.augment.scene_gen.target = Some(30);
    cfg.relevance.fit = true;
    cfg
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn desk_scale_pipeline(seed: u64) -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::write_corpus(dir.path(), seed, 100, 100, 10);
    let cfg = desk_config(dir.path(), "a", seed);
    let start = Instant::now();
    let (manifest, report) = Pipeline::new(cfg.clone()).and_then(|p| p.run_full()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;

    let sum: usize = manifest.source_counts.values().sum();
    ensure(manifest.total == sum, || format!("total {} vs provenance sum {sum}", manifest.total))?;
    ensure(manifest.source_counts[&Provenance::Original] == 100, || "originals not all kept".into())?;
    let mut compared = 0;
    for (family, f) in &report.augmentation {
        ensure(f.generated <= 30, || format!("{family}: {} over cap", f.generated))?;
        let rejected = f.rejected_low_relevance + f.rejected_threshold + f.duplicates;
        ensure(rejected + f.kept == f.generated, || format!("{family}: {rejected} + {} != {}", f.kept, f.generated))?;
        if let (Some(g), Some(k)) = (f.mean_score_generated, f.mean_score_kept) {
            compared += 1;
            ensure(k >= g, || format!("{family}: gated mean {k} < ungated mean {g}"))?;
        }
    }
    ensure(compared > 0, || "no family kept any record".into())?;

    let again = desk_config(dir.path(), "b", seed);
    Pipeline::new(again.clone()).and_then(|p| p.run()).map_err(|e| e.to_string())?;
    for f in ["dataset.jsonl", "manifest.json", "rejected.jsonl", "stats.json"] {
        let same = read(&cfg.output_dir.join(f))? == read(&again.output_dir.join(f))?;
        ensure(same, || format!("{f} differs on rerun"))?;
    }
    Ok(())
}

// ---- stats ----

fn stats_reproduction() -> Check {
    for (q, want) in [
        ("what color is it?", QuestionCategory::LocalObject),
        ("how many are there?", QuestionCategory::GlobalContext),
        ("what is to the right of the trash can?", QuestionCategory::Relational),
    ] {
        let got = classify_question(q);
        ensure(got == want, || format!("`{q}` -> {got:?}, expected {want:?}"))?;
    }
    let mut rng = stream_rng(0, "acceptance", "stats");
    for seed in 0..10 {
        let n = rng.gen_range(1..400);
        let records = common::qa(seed, n, 1 + n / 10);
        let report: StatsReport = stats(&records);
        let hist: usize = report.question_type_histogram.values().sum();
        let prov: usize = report.totals.values().sum();
        ensure(report.total == n && hist == n && prov == n, || {
            format!("corpus {seed}: size {n}, total {}, histogram {hist}, provenance {prov}", report.total)
        })?;
    }
    Ok(())
}

#[test]
fn acceptance() {
    let mut criteria: Vec<(String, Box<dyn Fn() -> Check>)> = vec![
        ("metric oracle equivalence".into(), Box::new(metric_oracle_equivalence)),
        ("threshold calibration".into(), Box::new(threshold_calibration)),
        ("gate properties".into(), Box::new(gate_properties)),
        ("augmentation invariants".into(), Box::new(augmentation_invariants)),
    ];
    for seed in [1, 2, 3, 4, 5] {
        criteria.push((format!("desk-scale pipeline (seed {seed})"), Box::new(move || desk_scale_pipeline(seed))));
    }
    criteria.push(("stats reproduction".into(), Box::new(stats_reproduction)));

    println!();
    let mut failed = vec![];
    for (name, check) in &criteria {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name.clone());
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
