//! Seeded scenario generator.
//!
//! Each scenario lays a few words out left to right on a 1000×1000 canvas,
//! derives detections from them according to a [`ScenarioKind`], and
//! computes the expected result with the reference implementation in
//! [`oracle`]. The same spec always yields the same scenario.

pub mod oracle;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::annotation::report::Report;
use crate::annotation::{serialize, Format, ImageAnnotation, ParseOptions, TextInstance};
use crate::evaluate::ImageEvalResult;
use crate::geometry::Polygon;
use oracle::{OracleInstance, Rect};

const CANVAS: i64 = 1000;
const MARGIN: i64 = 10;
/// Words stay above this line; stray detections go below it.
const TEXT_FLOOR: i64 = 800;
const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Exact,
    Deletion,
    Insertion,
    Substitution,
    Split,
    Merge,
    Permutation,
    DontCareOverlap,
    NoOverlap,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::Exact,
        ScenarioKind::Deletion,
        ScenarioKind::Insertion,
        ScenarioKind::Substitution,
        ScenarioKind::Split,
        ScenarioKind::Merge,
        ScenarioKind::Permutation,
        ScenarioKind::DontCareOverlap,
        ScenarioKind::NoOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Exact => "exact",
            ScenarioKind::Deletion => "deletion",
            ScenarioKind::Insertion => "insertion",
            ScenarioKind::Substitution => "substitution",
            ScenarioKind::Split => "split",
            ScenarioKind::Merge => "merge",
            ScenarioKind::Permutation => "permutation",
            ScenarioKind::DontCareOverlap => "dontcare_overlap",
            ScenarioKind::NoOverlap => "no_overlap",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scenario kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for ScenarioKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Number of words, clamped to 1..=12 (at least 2 for merges).
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Word-level ground truth.
    pub gt: Vec<OracleInstance>,
    pub det: Vec<OracleInstance>,
    /// Character boxes of every word; don't-care words stay whole.
    pub char_gt: Vec<OracleInstance>,
    pub expected: ImageEvalResult,
}

fn instances(boxes: &[OracleInstance]) -> Vec<TextInstance> {
    boxes
        .iter()
        .map(|b| {
            let polygon = Polygon::rect(b.rect[0], b.rect[1], b.rect[2], b.rect[3]).expect("generated boxes are valid");
            if b.dont_care {
                TextInstance::dont_care(polygon)
            } else {
                TextInstance::new(polygon, b.text.clone())
            }
        })
        .collect()
}

fn expected_for(gt: &[OracleInstance], det: &[OracleInstance]) -> ImageEvalResult {
    let (removed, gt_chars, det_chars) = oracle::evaluate(gt, det, true);
    ImageEvalResult::from_counts(removed, gt_chars, det_chars)
}

impl Scenario {
    pub fn gt_instances(&self) -> Vec<TextInstance> {
        instances(&self.gt)
    }

    pub fn det_instances(&self) -> Vec<TextInstance> {
        instances(&self.det)
    }

    pub fn char_gt_instances(&self) -> Vec<TextInstance> {
        instances(&self.char_gt)
    }

    /// Expected result against the character-level ground truth.
    pub fn expected_char_level(&self) -> ImageEvalResult {
        expected_for(&self.char_gt, &self.det)
    }

    /// Moves every detection edge by up to `fraction` of the box height,
    /// independently and uniformly, and recomputes the expected result.
    pub fn with_jitter(&self, fraction: f64, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for d in &mut out.det {
            let h = d.rect[3] - d.rect[1];
            let mut r = d.rect;
            for v in &mut r {
                *v += rng.gen_range(-fraction..=fraction) * h;
            }
            if r[2] > r[0] && r[3] > r[1] {
                d.rect = r;
            }
        }
        out.expected = expected_for(&out.gt, &out.det);
        out
    }

    pub fn gt_annotation(&self, image_id: &str) -> ImageAnnotation {
        ImageAnnotation {
            image_id: image_id.to_owned(),
            instances: self.gt_instances(),
        }
    }

    pub fn det_annotation(&self, image_id: &str) -> ImageAnnotation {
        ImageAnnotation {
            image_id: image_id.to_owned(),
            instances: self.det_instances(),
        }
    }
}

struct Word {
    text: Vec<char>,
    rect: [i64; 4],
    char_width: i64,
}

impl Word {
    fn rect(&self) -> Rect {
        self.rect.map(|v| v as f64)
    }

    fn char_rect(&self, i: usize) -> Rect {
        let l = self.rect[0] + i as i64 * self.char_width;
        [l, self.rect[1], l + self.char_width, self.rect[3]].map(|v| v as f64)
    }
}

fn random_char(rng: &mut ChaCha8Rng) -> char {
    ALPHABET[rng.gen_range(0..ALPHABET.len())] as char
}

fn random_word(rng: &mut ChaCha8Rng, distinct: bool) -> Vec<char> {
    loop {
        let len = rng.gen_range(2..=8);
        let w: Vec<char> = (0..len).map(|_| random_char(rng)).collect();
        if !distinct || w.iter().any(|&c| c != w[0]) {
            return w;
        }
    }
}

fn layout(rng: &mut ChaCha8Rng, count: usize, distinct: bool) -> Vec<Word> {
    let char_width = rng.gen_range(12..=24);
    let height = char_width * 3 / 2;
    let (mut x, mut y) = (MARGIN, MARGIN);
    let mut words = Vec::with_capacity(count);
    for _ in 0..count {
        let text = random_word(rng, distinct);
        let width = text.len() as i64 * char_width;
        if x + width > CANVAS - MARGIN {
            x = MARGIN;
            y += height + MARGIN;
        }
        assert!(y + height <= TEXT_FLOOR, "layout overflow");
        words.push(Word {
            text,
            rect: [x, y, x + width, y + height],
            char_width,
        });
        let gap = (char_width as f64 * rng.gen_range(0.3..=1.0)).round() as i64;
        x += width + gap.max(1);
    }
    words
}

fn text(chars: &[char]) -> String {
    chars.iter().collect()
}

fn plain(rect: Rect, chars: &[char]) -> OracleInstance {
    OracleInstance {
        rect,
        text: text(chars),
        dont_care: false,
    }
}

/// Builds a scenario; see [`ScenarioKind`] for the perturbations.
pub fn generate(spec: &ScenarioSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (spec.kind as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let min_words = if spec.kind == ScenarioKind::Merge { 2 } else { 1 };
    let count = spec.word_count.clamp(min_words, 12);
    let words = layout(&mut rng, count, spec.kind == ScenarioKind::Permutation);

    // Every word is perturbed with probability 1/2, and at least one is.
    let mut perturbed: Vec<bool> = (0..count).map(|_| rng.gen_bool(0.5)).collect();
    let forced = rng.gen_range(0..count);
    perturbed[forced] = true;
    if spec.kind == ScenarioKind::Merge {
        // Merges need a right-hand neighbour on the same line.
        let pairs: Vec<usize> = (0..count - 1)
            .filter(|&i| words[i].rect[1] == words[i + 1].rect[1])
            .collect();
        perturbed = vec![false; count];
        if let Some(&i) = pairs.choose(&mut rng) {
            perturbed[i] = true;
        }
    }

    let mut gt = Vec::new();
    let mut char_gt = Vec::new();
    let mut det = Vec::new();
    let mut stray_x = MARGIN;
    let mut i = 0;
    while i < count {
        let w = &words[i];
        let dont_care = spec.kind == ScenarioKind::DontCareOverlap && perturbed[i];
        gt.push(OracleInstance {
            rect: w.rect(),
            text: if dont_care { String::new() } else { text(&w.text) },
            dont_care,
        });
        if dont_care {
            char_gt.push(gt.last().unwrap().clone());
        } else {
            for (k, &c) in w.text.iter().enumerate() {
                char_gt.push(plain(w.char_rect(k), &[c]));
            }
        }

        if !perturbed[i] {
            let mut t = w.text.clone();
            if rng.gen_bool(0.2) {
                t = text(&t).to_lowercase().chars().collect();
            }
            det.push(plain(w.rect(), &t));
            i += 1;
            continue;
        }
        let mut t = w.text.clone();
        match spec.kind {
            ScenarioKind::Exact => det.push(plain(w.rect(), &t)),
            ScenarioKind::Deletion => {
                t.remove(rng.gen_range(0..t.len()));
                det.push(plain(w.rect(), &t));
            }
            ScenarioKind::Insertion => {
                let at = rng.gen_range(0..=t.len());
                t.insert(at, random_char(&mut rng));
                det.push(plain(w.rect(), &t));
            }
            ScenarioKind::Substitution => {
                let at = rng.gen_range(0..t.len());
                let old = t[at];
                while t[at] == old {
                    t[at] = random_char(&mut rng);
                }
                det.push(plain(w.rect(), &t));
            }
            ScenarioKind::Split => {
                let cut = rng.gen_range(1..t.len());
                let mut left = w.rect();
                left[2] = w.char_rect(cut)[0];
                let mut right = w.rect();
                right[0] = left[2];
                det.push(plain(left, &t[..cut]));
                det.push(plain(right, &t[cut..]));
            }
            ScenarioKind::Merge => {
                let next = &words[i + 1];
                gt.push(plain(next.rect(), &next.text));
                for (k, &c) in next.text.iter().enumerate() {
                    char_gt.push(plain(next.char_rect(k), &[c]));
                }
                let mut joined = t.clone();
                joined.extend(&next.text);
                let r = w.rect();
                det.push(plain([r[0], r[1], next.rect()[2], r[3]], &joined));
                i += 2;
                continue;
            }
            ScenarioKind::Permutation => {
                let original = t.clone();
                while t == original {
                    t.shuffle(&mut rng);
                }
                det.push(plain(w.rect(), &t));
            }
            ScenarioKind::DontCareOverlap => {
                let noise = random_word(&mut rng, false);
                det.push(plain(w.rect(), &noise));
            }
            ScenarioKind::NoOverlap => {
                // A detection of this word placed in the empty band.
                let width = w.rect[2] - w.rect[0];
                let (l, top) = (stray_x, TEXT_FLOOR + 2 * MARGIN);
                if l + width <= CANVAS - MARGIN {
                    stray_x += width + MARGIN;
                    det.push(plain(
                        [l, top, l + width, top + (w.rect[3] - w.rect[1])].map(|v| v as f64),
                        &t,
                    ));
                }
            }
        }
        i += 1;
    }

    let expected = expected_for(&gt, &det);
    Scenario {
        kind: spec.kind,
        gt,
        det,
        char_gt,
        expected,
    }
}

/// The four detection outcomes on a single word "POPEVAL" (a 70×20 box at
/// (100, 100)):
///
/// * A: "POP" and "EVAL", an exact split;
/// * B: "OP" and "EVAL", a missing character;
/// * C: "POPE" and "EVAL", overlapping pieces with one extra character;
/// * D: "DOP" and "EW", a mostly wrong reading.
pub fn figure_one(case: char) -> Option<Scenario> {
    let at = |l: f64, r: f64, t: &str| OracleInstance {
        rect: [100.0 + l, 100.0, 100.0 + r, 120.0],
        text: t.to_owned(),
        dont_care: false,
    };
    let det = match case.to_ascii_uppercase() {
        'A' => vec![at(0.0, 30.0, "POP"), at(30.0, 70.0, "EVAL")],
        'B' => vec![at(10.0, 30.0, "OP"), at(30.0, 70.0, "EVAL")],
        // EVAL starts at 31 so the two pieces do not cover equal shares.
        'C' => vec![at(0.0, 40.0, "POPE"), at(31.0, 70.0, "EVAL")],
        'D' => vec![at(-10.0, 30.0, "DOP"), at(30.0, 55.0, "EW")],
        _ => return None,
    };
    let gt = vec![at(0.0, 70.0, "POPEVAL")];
    let char_gt = "POPEVAL"
        .chars()
        .enumerate()
        .map(|(i, c)| at(10.0 * i as f64, 10.0 * (i + 1) as f64, &c.to_string()))
        .collect();
    let expected = expected_for(&gt, &det);
    Some(Scenario {
        kind: ScenarioKind::Split,
        gt,
        det,
        char_gt,
        expected,
    })
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("a corpus needs at least one image")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Spec of image `index` in a corpus generated from `seed`: kinds cycle,
/// seeds and word counts are drawn from the corpus seed.
pub fn corpus_spec(seed: u64, index: usize) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    ScenarioSpec {
        kind: ScenarioKind::ALL[index % ScenarioKind::ALL.len()],
        seed: rng.gen(),
        word_count: rng.gen_range(1..=6),
    }
}

pub fn corpus_image_id(index: usize) -> String {
    format!("img_{:04}", index + 1)
}

/// Writes `n` scenarios under `dir`: `gt/gt_<id>.txt` and
/// `det/res_<id>.txt` in the ICDAR 2015 grammar, plus `expected.json`, a
/// report whose `per_image` rows hold the reference results.
pub fn generate_corpus(n: usize, seed: u64, dir: &Path) -> Result<Vec<(String, ImageEvalResult)>, SynthError> {
    if n == 0 {
        return Err(SynthError::Empty);
    }
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| SynthError::Io { path, source }
    };
    let (gt_dir, det_dir) = (dir.join("gt"), dir.join("det"));
    fs::create_dir_all(&gt_dir).map_err(io(&gt_dir))?;
    fs::create_dir_all(&det_dir).map_err(io(&det_dir))?;

    let opts = ParseOptions::default();
    let results = (0..n)
        .into_par_iter()
        .map(|i| {
            let id = corpus_image_id(i);
            let scenario = generate(&corpus_spec(seed, i));
            let gt_path = gt_dir.join(format!("gt_{id}.txt"));
            let det_path = det_dir.join(format!("res_{id}.txt"));
            fs::write(
                &gt_path,
                serialize(&scenario.gt_annotation(&id), Format::Icdar2015, &opts),
            )
            .map_err(io(&gt_path))?;
            fs::write(
                &det_path,
                serialize(&scenario.det_annotation(&id), Format::Icdar2015, &opts),
            )
            .map_err(io(&det_path))?;
            Ok((id, scenario.expected))
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let mut config = Map::new();
    config.insert("images".into(), Value::from(n));
    config.insert("seed".into(), Value::from(seed));
    let report = Report::popeval(config, &results, Vec::new());
    let manifest = dir.join("expected.json");
    fs::write(&manifest, report.render()).map_err(io(&manifest))?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{evaluate_image, EvalConfig};
    use crate::geometry::intersection_area;

    #[test]
    fn exact_single_word() {
        let s = generate(&ScenarioSpec {
            kind: ScenarioKind::Exact,
            seed: 1,
            word_count: 1,
        });
        assert_eq!((s.expected.precision, s.expected.recall), (1.0, 1.0));
    }

    #[test]
    fn merge_of_two_words() {
        for seed in 0..20 {
            let s = generate(&ScenarioSpec {
                kind: ScenarioKind::Merge,
                seed,
                word_count: 2,
            });
            if s.det.len() == 1 {
                assert_eq!((s.expected.precision, s.expected.recall), (1.0, 1.0));
            }
        }
    }

    #[test]
    fn figure_cases() {
        let b = figure_one('B').unwrap().expected;
        assert_eq!((b.removed_weight, b.precision), (6.0, 1.0));
        assert!((b.recall - 0.857142).abs() < 1e-6);
        let c = figure_one('c').unwrap().expected;
        assert_eq!((c.removed_weight, c.recall, c.precision), (7.0, 1.0, 0.875));
        let d = figure_one('D').unwrap().expected;
        assert_eq!((d.removed_weight, d.recall, d.precision), (3.0, 3.0 / 7.0, 3.0 / 5.0));
        assert!(figure_one('E').is_none());
    }

    #[test]
    fn deterministic_and_matches_evaluator() {
        for kind in ScenarioKind::ALL {
            for seed in 0..10 {
                let spec = ScenarioSpec {
                    kind,
                    seed,
                    word_count: 4,
                };
                let s = generate(&spec);
                assert_eq!(s, generate(&spec));
                let got = evaluate_image(&s.gt_instances(), &s.det_instances(), &EvalConfig::default());
                assert!(
                    (got.removed_weight - s.expected.removed_weight).abs() < 1e-9,
                    "{kind} {seed}"
                );
            }
        }
    }

    #[test]
    fn ground_truth_boxes_do_not_overlap() {
        for kind in ScenarioKind::ALL {
            let s = generate(&ScenarioSpec {
                kind,
                seed: 3,
                word_count: 12,
            });
            let g = s.gt_instances();
            for i in 0..g.len() {
                for j in i + 1..g.len() {
                    assert_eq!(intersection_area(&g[i].polygon, &g[j].polygon), 0.0);
                }
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>(), Ok(k));
        }
        assert!("bogus".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn corpus_needs_images() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(generate_corpus(0, 1, dir.path()), Err(SynthError::Empty)));
    }
}
