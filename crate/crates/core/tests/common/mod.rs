//! Seeded synthetic ScanQA/ScanRefer-style corpora for integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use sdf_core::corpus::{write_jsonl, CaptionRecord, Provenance, QARecord, SceneId};
use sdf_core::metrics::Box3D;
use sdf_core::rng::stream_rng;

pub const OBJECTS: &[&str] = &[
    "chair", "table", "desk", "lamp", "bed", "pillow", "sofa", "door", "window", "cabinet",
    "shelf", "monitor", "bookshelf", "trash can", "couch", "picture", "box", "nightstand",
];
pub const COLORS: &[&str] = &["brown", "white", "black", "red", "blue", "gray", "green", "beige"];
pub const RELATIONS: &[&str] = &["next to", "left of", "right of", "near", "behind", "under", "on", "above"];
pub const LOCATIONS: &[&str] = &[
    "in the corner",
    "by the window",
    "against the wall",
    "in the middle of the room",
    "at the end of the bed",
];
pub const SIZES: &[&str] = &["big", "small", "tall", "large", "little"];
pub const COUNTS: &[&str] = &["two", "three", "four"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().unwrap()
}

fn scene(i: usize) -> SceneId {
    SceneId::new(format!("scene{:04}_00", i), true).unwrap()
}

fn plural(o: &str) -> String {
    if o.ends_with('x') || o.ends_with("ch") {
        format!("{o}es")
    } else {
        format!("{o}s")
    }
}

/// `n` caption records spread over `n_scenes` scenes.
pub fn captions(seed: u64, n: usize, n_scenes: usize) -> Vec<CaptionRecord> {
    let mut rng = stream_rng(seed, "synth", "captions");
    (0..n)
        .map(|i| {
            let obj = pick(&mut rng, OBJECTS);
            let color = pick(&mut rng, COLORS);
            let rel = pick(&mut rng, RELATIONS);
            let anchor = pick(&mut rng, OBJECTS);
            let loc = pick(&mut rng, LOCATIONS);
            let description = match rng.gen_range(0..5) {
                0 => format!("a {color} {obj} {rel} the {anchor} {loc}"),
                1 => format!("this is a {color} {obj}. it is {rel} the {anchor}."),
                2 => format!("{} {color} {} {rel} the {anchor}", pick(&mut rng, COUNTS), plural(obj)),
                3 => format!("the {obj} is {color} and stands {loc}"),
                _ => format!("a {} {color} {obj} {loc}", pick(&mut rng, SIZES)),
            };
            let c = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)];
            let d = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
            CaptionRecord {
                id: format!("cap{i:04}"),
                scene_id: scene(i % n_scenes),
                object_id: rng.gen_range(0..40),
                object_name: obj.replace(' ', "_"),
                description,
                bbox: Some(Box3D::new(c, d)),
            }
        })
        .collect()
}

/// `n` original QA records spread over `n_scenes` scenes, covering every
/// question category.
pub fn qa(seed: u64, n: usize, n_scenes: usize) -> Vec<QARecord> {
    let mut rng = stream_rng(seed, "synth", "qa");
    (0..n)
        .map(|i| {
            let obj = pick(&mut rng, OBJECTS);
            let anchor = pick(&mut rng, OBJECTS);
            let size = pick(&mut rng, SIZES);
            let (question, answer) = match rng.gen_range(0..10) {
                0 => (format!("what color is the {size} {obj}?"), pick(&mut rng, COLORS).to_string()),
                1 => (format!("how many {} are there?", plural(obj)), rng.gen_range(1..6).to_string()),
                2 => (format!("what is to the right of the {obj}?"), anchor.to_string()),
                3 => (format!("where is the {obj} located?"), pick(&mut rng, LOCATIONS).to_string()),
                4 => {
                    let state = if rng.gen_bool(0.5) { "open" } else { "closed" };
                    let yn = if rng.gen_bool(0.5) { "yes" } else { "no" };
                    (format!("is the {obj} {state}?"), yn.to_string())
                }
                5 => (
                    format!("what is on the {anchor}, next to the {obj}?"),
                    pick(&mut rng, OBJECTS).to_string(),
                ),
                6 => (
                    format!("what kind of {obj} is {} the {anchor}?", pick(&mut rng, RELATIONS)),
                    format!("{size} {obj}"),
                ),
                7 => {
                    let side = if rng.gen_bool(0.5) { "left" } else { "right" };
                    let yn = if rng.gen_bool(0.5) { "yes" } else { "no" };
                    (format!("is the {obj} on the {side} of the {anchor}?"), yn.to_string())
                }
                8 => (format!("which way is the {obj} facing?"), "the door".to_string()),
                _ => (format!("what is placed in the middle of the {size} {obj}?"), anchor.to_string()),
            };
            QARecord {
                id: format!("q{i:04}"),
                scene_id: scene(i % n_scenes),
                question,
                answers: vec![answer],
                object_ids: vec![rng.gen_range(0..40)],
                provenance: Provenance::Original,
                scores: None,
            }
        })
        .collect()
}

/// Writes `qa.jsonl` and `captions.jsonl` into `dir`.
pub fn write_corpus(dir: &Path, seed: u64, n_qa: usize, n_captions: usize, n_scenes: usize) {
    std::fs::create_dir_all(dir).unwrap();
    write_jsonl(&dir.join("qa.jsonl"), &qa(seed, n_qa, n_scenes)).unwrap();
    write_jsonl(&dir.join("captions.jsonl"), &captions(seed, n_captions, n_scenes)).unwrap();
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}
