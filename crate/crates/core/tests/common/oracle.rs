//! Naive reference implementations of the captioning metrics. Nothing here
//! calls into the crate: n-grams are plain vectors, counts come from linear
//! scans and stems from a fixed table over the test vocabulary.

/// Test vocabulary: (word, stem). Stems follow the `-ing/-ed/-es/-s` rule by
/// hand so the stem stage is exercised.
pub const VOCAB: &[(&str, &str)] = &[
    ("a", "a"),
    ("the", "the"),
    ("is", "is"),
    ("on", "on"),
    ("red", "red"),
    ("chair", "chair"),
    ("chairs", "chair"),
    ("lamp", "lamp"),
    ("lamps", "lamp"),
    ("sits", "sit"),
    ("sitting", "sitt"),
    ("placed", "plac"),
    ("boxes", "box"),
    ("box", "box"),
    ("glass", "glass"),
    (".", "."),
];

fn stem(w: &str) -> &str {
    VOCAB
        .iter()
        .find(|(word, _)| *word == w)
        .map(|(_, s)| *s)
        .unwrap_or_else(|| panic!("word `{w}` outside the oracle vocabulary"))
}

#[derive(Debug, Clone)]
pub struct Item {
    pub cand: Vec<String>,
    pub refs: Vec<Vec<String>>,
}

fn grams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return vec![];
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![];
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// Corpus BLEU-n; items with `mask[i] == false` contribute no matches.
pub fn bleu(items: &[Item], n: usize, mask: Option<&[bool]>) -> f64 {
    let mut log_p = 0.0;
    for order in 1..=n {
        let (mut num, mut den) = (0usize, 0usize);
        for (i, it) in items.iter().enumerate() {
            let cg = grams(&it.cand, order);
            den += cg.len();
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            for g in distinct(&cg) {
                let mut best = 0;
                for r in &it.refs {
                    best = best.max(count(&grams(r, order), &g));
                }
                num += count(&cg, &g).min(best);
            }
        }
        if num == 0 {
            return 0.0;
        }
        log_p += (num as f64 / den as f64).ln() / n as f64;
    }
    let c: usize = items.iter().map(|it| it.cand.len()).sum();
    let mut r = 0usize;
    for it in items {
        let mut best: Option<usize> = None;
        for x in &it.refs {
            let l = x.len();
            best = match best {
                None => Some(l),
                Some(b) => {
                    let (db, dl) = (b.abs_diff(it.cand.len()), l.abs_diff(it.cand.len()));
                    if dl < db || (dl == db && l < b) {
                        Some(l)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        r += best.unwrap();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * log_p.exp()
}

/// LCS by full table.
fn lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn rouge_l_item(it: &Item) -> f64 {
    let mut best: f64 = 0.0;
    for r in &it.refs {
        let l = lcs(&it.cand, r) as f64;
        if l == 0.0 {
            continue;
        }
        let (p, rec) = (l / it.cand.len() as f64, l / r.len() as f64);
        let b2 = 1.2f64 * 1.2;
        best = best.max((1.0 + b2) * p * rec / (rec + b2 * p));
    }
    best
}

/// Greedy exact-then-stem alignment, candidate left to right, earliest free
/// reference position.
fn align(c: &[String], r: &[String]) -> Vec<(usize, usize)> {
    let mut cu = vec![false; c.len()];
    let mut ru = vec![false; r.len()];
    let mut pairs = vec![];
    for by_stem in [false, true] {
        for i in 0..c.len() {
            if cu[i] {
                continue;
            }
            for j in 0..r.len() {
                let hit = if by_stem { stem(&c[i]) == stem(&r[j]) } else { c[i] == r[j] };
                if !ru[j] && hit {
                    cu[i] = true;
                    ru[j] = true;
                    pairs.push((i, j));
                    break;
                }
            }
        }
    }
    pairs.sort();
    pairs
}

pub fn meteor_item(it: &Item) -> f64 {
    let mut best: f64 = 0.0;
    for r in &it.refs {
        let pairs = align(&it.cand, r);
        let m = pairs.len() as f64;
        if m == 0.0 {
            continue;
        }
        let mut chunks = 1.0;
        for k in 1..pairs.len() {
            if !(pairs[k].0 == pairs[k - 1].0 + 1 && pairs[k].1 == pairs[k - 1].1 + 1) {
                chunks += 1.0;
            }
        }
        let (p, rec) = (m / it.cand.len() as f64, m / r.len() as f64);
        let f = p * rec / (0.9 * p + 0.1 * rec);
        best = best.max(f * (1.0 - 0.5 * (chunks / m).powi(3)));
    }
    best
}

pub fn cider_items(items: &[Item]) -> Vec<f64> {
    let n_docs = items.len() as f64;
    let df = |g: &[String]| -> f64 {
        let k = items
            .iter()
            .filter(|it| it.refs.iter().any(|r| count(&grams(r, g.len()), g) > 0))
            .count();
        (k.max(1)) as f64
    };
    let vector = |t: &[String], n: usize| -> Vec<(Vec<String>, f64)> {
        let all = grams(t, n);
        distinct(&all)
            .into_iter()
            .map(|g| {
                let w = count(&all, &g) as f64 * (n_docs.ln() - df(&g).ln());
                (g, w)
            })
            .collect()
    };
    let norm = |v: &[(Vec<String>, f64)]| v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    items
        .iter()
        .map(|it| {
            let mut total = 0.0;
            for r in &it.refs {
                let d = it.cand.len() as f64 - r.len() as f64;
                let pen = (-d * d / 72.0).exp();
                for n in 1..=4 {
                    let hv = vector(&it.cand, n);
                    let rv = vector(r, n);
                    let mut dot = 0.0;
                    for (g, h) in &hv {
                        for (g2, x) in &rv {
                            if g == g2 {
                                dot += h.min(*x) * x;
                            }
                        }
                    }
                    let (nh, nr) = (norm(&hv), norm(&rv));
                    if nh != 0.0 && nr != 0.0 {
                        dot /= nh * nr;
                    }
                    total += dot * pen / 4.0;
                }
            }
            10.0 * total / it.refs.len() as f64
        })
        .collect()
}

/// Mean over all items, with masked-out items scoring zero.
pub fn masked_mean(scores: &[f64], mask: Option<&[bool]>) -> f64 {
    let s: f64 = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, s)| s)
        .sum();
    s / scores.len() as f64
}

/// Axis-aligned IoU from min/max corners.
pub fn iou(a: ([f64; 3], [f64; 3]), b: ([f64; 3], [f64; 3])) -> f64 {
    let mut inter = 1.0;
    for k in 0..3 {
        let lo = (a.0[k] - a.1[k] / 2.0).max(b.0[k] - b.1[k] / 2.0);
        let hi = (a.0[k] + a.1[k] / 2.0).min(b.0[k] + b.1[k] / 2.0);
        inter *= (hi - lo).max(0.0);
    }
    let va = a.1[0] * a.1[1] * a.1[2];
    let vb = b.1[0] * b.1[1] * b.1[2];
    if inter == 0.0 {
        0.0
    } else {
        inter / (va + vb - inter)
    }
}
