//! Corpus diagnostics: permutation cases, split/merge occurrences, and
//! correlation of metric scores with human ratings.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annotation::{normalize_transcript, NormalizeOptions, TextInstance};
use crate::baseline::match_instances;
use crate::geometry::{area_precision, area_recall};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("sequences have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("correlation is undefined: a sequence has zero variance")]
    ZeroVariance,
    #[error("image ids do not align (missing human scores: [{}]; missing metric scores: [{}])", .missing_human.join(", "), .missing_metric.join(", "))]
    Alignment {
        metric: String,
        missing_human: Vec<String>,
        missing_metric: Vec<String>,
    },
    #[error("human scores line {line}: {reason}")]
    HumanScores { line: usize, reason: String },
}

/// Options for permutation checks: case folded, alphanumerics only.
pub fn permutation_options(case_fold: bool) -> NormalizeOptions {
    NormalizeOptions {
        case_fold,
        strip_surrounding_whitespace: true,
        alphanumeric_only: true,
    }
}

fn sorted_chars(s: &str) -> Vec<char> {
    let mut v: Vec<char> = s.chars().collect();
    v.sort_unstable();
    v
}

/// True when both texts, after normalization, use the same characters the
/// same number of times but in a different order.
pub fn detect_permutations(gt: &str, det: &str, opts: &NormalizeOptions) -> bool {
    let (g, d) = (normalize_transcript(gt, opts), normalize_transcript(det, opts));
    g != d && sorted_chars(&g) == sorted_chars(&d)
}

/// Counts over IoU-matched pairs: `same_components` pairs share their
/// character multiset, `permuted` of those differ in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PermutationCounts {
    pub permuted: usize,
    pub same_components: usize,
}

impl PermutationCounts {
    pub fn add(&mut self, other: PermutationCounts) {
        self.permuted += other.permuted;
        self.same_components += other.same_components;
    }

    pub fn fraction(&self) -> f64 {
        ratio(self.permuted, self.same_components)
    }
}

pub fn permutation_counts<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    opts: &NormalizeOptions,
) -> PermutationCounts {
    let mut out = PermutationCounts::default();
    for p in match_instances(gts, dets, threshold).pairs {
        let g = normalize_transcript(&gts[p.gt].as_ref().transcript, opts);
        let d = normalize_transcript(&dets[p.det].as_ref().transcript, opts);
        if sorted_chars(&g) == sorted_chars(&d) {
            out.same_components += 1;
            if g != d {
                out.permuted += 1;
            }
        }
    }
    out
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitMergeCounts {
    pub split_dets: usize,
    pub dets: usize,
    pub merged_gts: usize,
    pub gts: usize,
}

impl SplitMergeCounts {
    pub fn add(&mut self, other: SplitMergeCounts) {
        self.split_dets += other.split_dets;
        self.dets += other.dets;
        self.merged_gts += other.merged_gts;
        self.gts += other.gts;
    }

    pub fn split_fraction(&self) -> f64 {
        ratio(self.split_dets, self.dets)
    }

    pub fn merge_fraction(&self) -> f64 {
        ratio(self.merged_gts, self.gts)
    }
}

// Strict containment: `part` occurs inside `whole` and is shorter.
fn part_of(part: &str, whole: &str) -> bool {
    !part.is_empty() && part.len() < whole.len() && whole.contains(part)
}

/// A detection is a split piece when its text is a proper part of some
/// ground truth's text and more than half of the detection lies on that
/// ground truth. A ground truth is merged when its text is a proper part of
/// some detection's text and more than half of the ground truth lies under
/// that detection.
pub fn count_split_merge<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    opts: &NormalizeOptions,
) -> SplitMergeCounts {
    let gt_text: Vec<String> = gts
        .iter()
        .map(|g| normalize_transcript(&g.as_ref().transcript, opts))
        .collect();
    let det_text: Vec<String> = dets
        .iter()
        .map(|d| normalize_transcript(&d.as_ref().transcript, opts))
        .collect();
    let split_dets = dets
        .iter()
        .enumerate()
        .filter(|(di, d)| {
            gts.iter().enumerate().any(|(gi, g)| {
                part_of(&det_text[*di], &gt_text[gi]) && area_precision(&g.as_ref().polygon, &d.as_ref().polygon) > 0.5
            })
        })
        .count();
    let merged_gts = gts
        .iter()
        .enumerate()
        .filter(|(gi, g)| {
            dets.iter().enumerate().any(|(di, d)| {
                part_of(&gt_text[*gi], &det_text[di]) && area_recall(&g.as_ref().polygon, &d.as_ref().polygon) > 0.5
            })
        })
        .count();
    SplitMergeCounts {
        split_dets,
        dets: dets.len(),
        merged_gts,
        gts: gts.len(),
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewSamples(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // Relative check so that constant sequences with rounding residue still
    // count as constant.
    let flat = |s: f64, m: f64| s <= 1e-24 * (1.0 + m * m) * n;
    if flat(sxx, mx) || flat(syy, my) {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Per-image human ratings on the 1–5 scale, possibly averaged over raters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HumanScoreTable {
    pub scores: BTreeMap<String, f64>,
}

impl HumanScoreTable {
    /// Parses `image_id,score` lines with integer scores 1 to 5. A first
    /// line that does not parse as a score is taken as a header.
    pub fn parse(bytes: &[u8]) -> Result<Self, AnalysisError> {
        let text = std::str::from_utf8(bytes).map_err(|_| AnalysisError::HumanScores {
            line: 0,
            reason: "not valid UTF-8".into(),
        })?;
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut scores = BTreeMap::new();
        let mut first = true;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| AnalysisError::HumanScores { line: i + 1, reason };
            let Some((id, score)) = line.rsplit_once(',') else {
                return Err(err("expected image_id,score".into()));
            };
            let (id, score) = (id.trim(), score.trim());
            let value = match score.parse::<u8>() {
                Ok(v) => v,
                Err(_) if first => {
                    first = false;
                    continue;
                }
                Err(_) => return Err(err(format!("score {score:?} is not an integer"))),
            };
            first = false;
            if !(1..=5).contains(&value) {
                return Err(err(format!("score {value} outside 1..=5")));
            }
            if id.is_empty() {
                return Err(err("empty image id".into()));
            }
            if scores.insert(id.to_owned(), f64::from(value)).is_some() {
                return Err(err(format!("image {id} rated twice")));
            }
        }
        Ok(HumanScoreTable { scores })
    }

    /// Mean rating per image over several raters. Every rater must cover
    /// the same images.
    pub fn average(tables: &[HumanScoreTable]) -> Result<Self, AnalysisError> {
        let Some(first) = tables.first() else {
            return Ok(HumanScoreTable::default());
        };
        for t in &tables[1..] {
            check_alignment("rater", &first.scores, &t.scores)?;
        }
        let n = tables.len() as f64;
        let scores = first
            .scores
            .keys()
            .map(|id| (id.clone(), tables.iter().map(|t| t.scores[id]).sum::<f64>() / n))
            .collect();
        Ok(HumanScoreTable { scores })
    }
}

fn check_alignment(
    metric: &str,
    human: &BTreeMap<String, f64>,
    scores: &BTreeMap<String, f64>,
) -> Result<(), AnalysisError> {
    let h: BTreeSet<&String> = human.keys().collect();
    let s: BTreeSet<&String> = scores.keys().collect();
    if h == s && !h.is_empty() {
        return Ok(());
    }
    Err(AnalysisError::Alignment {
        metric: metric.to_owned(),
        missing_human: s.difference(&h).map(|s| s.to_string()).collect(),
        missing_metric: h.difference(&s).map(|s| s.to_string()).collect(),
    })
}

/// Pearson correlation between each metric's per-image scores and the
/// human ratings, over identical image sets.
pub fn correlate_with_human(
    metrics: &BTreeMap<String, BTreeMap<String, f64>>,
    human: &HumanScoreTable,
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    let mut out = BTreeMap::new();
    for (name, scores) in metrics {
        check_alignment(name, &human.scores, scores)?;
        let xs: Vec<f64> = scores.values().copied().collect();
        let ys: Vec<f64> = scores.keys().map(|id| human.scores[id]).collect();
        out.insert(name.clone(), pearson(&xs, &ys)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use proptest::prelude::*;

    fn inst(l: f64, r: f64, text: &str) -> TextInstance {
        TextInstance::new(Polygon::rect(l, 0.0, r, 10.0).unwrap(), text)
    }

    #[test]
    fn permutations() {
        let o = permutation_options(true);
        assert!(detect_permutations("stop", "pots", &o));
        assert!(!detect_permutations("stop", "stop", &o));
        assert!(!detect_permutations("stop", "stops", &o));
        assert!(!detect_permutations("Stop!", "stop", &o));
        assert!(detect_permutations("Stop!", "tops", &o));
    }

    #[test]
    fn permutation_counts_over_pairs() {
        let gts = vec![inst(0.0, 40.0, "stop"), inst(100.0, 140.0, "exit")];
        let dets = vec![inst(0.0, 40.0, "pots"), inst(100.0, 140.0, "EXIT")];
        let c = permutation_counts(&gts, &dets, 0.5, &permutation_options(true));
        assert_eq!(
            c,
            PermutationCounts {
                permuted: 1,
                same_components: 2
            }
        );
        assert_eq!(c.fraction(), 0.5);
    }

    #[test]
    fn split_and_merge() {
        let o = NormalizeOptions::case_fold(true);
        // "POP" sits on the left of a "POPEVAL" box, 60% of it inside.
        let gt = vec![inst(0.0, 70.0, "POPEVAL")];
        let split = vec![inst(-20.0, 30.0, "POP")];
        let c = count_split_merge(&gt, &split, &o);
        assert_eq!((c.split_dets, c.merged_gts), (1, 0));

        // GT "POP" is 80% under a "POPEVAL" detection.
        let gt = vec![inst(0.0, 50.0, "POP")];
        let merged = vec![inst(10.0, 200.0, "POPEVAL")];
        let c = count_split_merge(&gt, &merged, &o);
        assert_eq!((c.split_dets, c.merged_gts), (0, 1));

        let far = vec![inst(500.0, 560.0, "OP")];
        let c = count_split_merge(&gt, &far, &o);
        assert_eq!((c.split_fraction(), c.merge_fraction()), (0.0, 0.0));

        let exact = count_split_merge(&gt, &[inst(0.0, 50.0, "pop")], &o);
        assert_eq!((exact.split_dets, exact.merged_gts), (0, 0));
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
        let down: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
        // Closed form: cov 4/4, both variances 5/4, r = 1/1.25 = 0.6.
        assert!((pearson(&xs, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[3.0; 4]), Err(AnalysisError::ZeroVariance));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(AnalysisError::TooFewSamples(1)));
        assert_eq!(pearson(&xs, &[1.0]), Err(AnalysisError::LengthMismatch(4, 1)));
    }

    fn table(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn human_correlation() {
        let human = HumanScoreTable::parse(b"image_id,score\na,1\nb,2\nc,3\nd,4\n").unwrap();
        let mut metrics = BTreeMap::new();
        metrics.insert(
            "same".to_string(),
            table(&[("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)]),
        );
        metrics.insert(
            "shuffled".to_string(),
            table(&[("a", 2.0), ("b", 1.0), ("c", 4.0), ("d", 3.0)]),
        );
        let r = correlate_with_human(&metrics, &human).unwrap();
        assert!((r["same"] - 1.0).abs() < 1e-12);
        assert!((r["shuffled"] - 0.6).abs() < 1e-12);

        let mut flat = BTreeMap::new();
        flat.insert(
            "flat".to_string(),
            table(&[("a", 0.5), ("b", 0.5), ("c", 0.5), ("d", 0.5)]),
        );
        assert_eq!(correlate_with_human(&flat, &human), Err(AnalysisError::ZeroVariance));

        let mut short = BTreeMap::new();
        short.insert("m".to_string(), table(&[("a", 0.5), ("z", 0.7)]));
        match correlate_with_human(&short, &human) {
            Err(AnalysisError::Alignment {
                missing_human,
                missing_metric,
                ..
            }) => {
                assert_eq!(missing_human, vec!["z"]);
                assert_eq!(missing_metric, vec!["b", "c", "d"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = HumanScoreTable::parse(b"").unwrap();
        assert!(matches!(
            correlate_with_human(&metrics, &empty),
            Err(AnalysisError::Alignment { .. })
        ));
    }

    #[test]
    fn human_score_parsing() {
        assert!(HumanScoreTable::parse(b"a,6\n").is_err());
        assert!(HumanScoreTable::parse(b"a,1\nb,x\n").is_err());
        assert!(HumanScoreTable::parse(b"a,1\na,2\n").is_err());
        let r1 = HumanScoreTable::parse(b"a,1\nb,5\n").unwrap();
        let r2 = HumanScoreTable::parse(b"a,2\nb,4\n").unwrap();
        let r3 = HumanScoreTable::parse(b"a,3\nb,3\n").unwrap();
        let avg = HumanScoreTable::average(&[r1.clone(), r2, r3]).unwrap();
        assert_eq!(avg.scores["a"], 2.0);
        assert_eq!(avg.scores["b"], 4.0);
        let other = HumanScoreTable::parse(b"a,1\n").unwrap();
        assert!(HumanScoreTable::average(&[r1, other]).is_err());
    }

    proptest! {
        #[test]
        fn permutation_symmetry(a in "[a-dA-D!]{0,6}", b in "[a-dA-D!]{0,6}") {
            let o = permutation_options(true);
            prop_assert_eq!(detect_permutations(&a, &b, &o), detect_permutations(&b, &a, &o));
            prop_assert!(!detect_permutations(&a, &a, &o));
        }

        #[test]
        fn pearson_affine(
            xs in prop::collection::vec(-100.0..100.0f64, 2..20),
            a in 0.1..10.0f64,
            b in -50.0..50.0f64,
        ) {
            prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
            let up: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let down: Vec<f64> = xs.iter().map(|x| -a * x + b).collect();
            prop_assert!((pearson(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((pearson(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
        }
    }
}
