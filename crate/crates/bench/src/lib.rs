//! Seeded synthetic inputs for the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;
use sdf_core::metrics::{Box3D, Candidate, ReferenceSet};
use sdf_core::rng::stream_rng;

const WORDS: &[&str] = &[
    "a", "the", "is", "on", "in", "of", "to", "and", "chair", "table", "lamp", "window", "door", "bed", "brown",
    "white", "black", "wooden", "small", "large", "next", "left", "right", "corner", "wall", "room", "sits",
    "placed", "standing", "shelves", "boxes", "there",
];

fn sentence(rng: &mut impl Rng, len: usize) -> Vec<String> {
    (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect()
}

fn bbox(rng: &mut impl Rng) -> Box3D {
    Box3D::new(
        [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)],
        [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)],
    )
}

/// `n` aligned candidates and reference sets (five references each), with
/// boxes on both sides.
pub fn caption_corpus(n: usize, seed: u64) -> (Vec<Candidate>, Vec<ReferenceSet>) {
    let mut rng = stream_rng(seed, "bench", "captions");
    (0..n)
        .map(|i| {
            let id = format!("c{i}");
            let len = rng.gen_range(6..16);
            let mut c = Candidate::new(&id, sentence(&mut rng, len));
            let refs = (0..5)
                .map(|_| {
                    let len = rng.gen_range(6..16);
                    sentence(&mut rng, len)
                })
                .collect();
            let mut r = ReferenceSet::new(&id, refs);
            c.bbox = Some(bbox(&mut rng));
            r.bbox = Some(bbox(&mut rng));
            (c, r)
        })
        .unzip()
}

/// `n` short questions over a small vocabulary, so near-duplicates occur.
pub fn questions(n: usize, seed: u64) -> Vec<String> {
    let mut rng = stream_rng(seed, "bench", "questions");
    (0..n)
        .map(|_| {
            let len = rng.gen_range(4..10);
            sentence(&mut rng, len).join(" ") + "?"
        })
        .collect()
}
