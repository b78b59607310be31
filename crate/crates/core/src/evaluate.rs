//! Character-removal evaluation of one image.
//!
//! The evaluation works on two pools of live instances, ground truth and
//! detections, each carrying the characters it has left. It proceeds in
//! rounds:
//!
//! 1. Relate every live ground truth to the live detections overlapping it.
//!    A ground truth with exactly one overlapping detection forms a
//!    one-to-one pair; one with several forms a one-to-many group.
//! 2. If any one-to-one pair exists, process all of them, visiting ground
//!    truths in reading order (closest centroid to the top-left corner
//!    first). A detection shared by several ground truths gives each
//!    character away at most once. Every detection that took part is
//!    retired.
//! 3. Otherwise take the one-to-many group whose ground truth comes first in
//!    reading order and pick the detection(s) covering the largest share of
//!    it. Ties split the credit evenly. The picked detections are retired.
//! 4. Repeat until no relation is left.
//!
//! Ground truths survive across rounds until their text is used up, so a
//! word split over several detections is consumed piece by piece. Each
//! removed character counts as one true positive.

use std::cmp::Ordering;

use crate::annotation::{normalize_transcript, NormalizeOptions, TextInstance, DEFAULT_DONTCARE_TOKEN};
use crate::geometry::{self, Polygon};
use crate::score::ScoreTriple;

/// Tolerance for treating centroid distances or coordinates as equal.
const ORDER_TIE_EPS: f64 = 1e-9;
/// Tolerance for treating two area recalls as the same maximum.
const RECALL_TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub case_fold: bool,
    pub dontcare_token: String,
    /// Detections covered by a don't-care region beyond this share of
    /// their own area are dropped before evaluation.
    pub dontcare_overlap_threshold: f64,
    /// Minimum intersection area (px²) for two polygons to be related.
    pub intersection_epsilon: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            case_fold: true,
            dontcare_token: DEFAULT_DONTCARE_TOKEN.to_owned(),
            dontcare_overlap_threshold: 0.5,
            intersection_epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("don't-care overlap threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("intersection epsilon must be finite and non-negative, got {0}")]
    Epsilon(f64),
    #[error("don't-care token must not be empty")]
    EmptyToken,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.dontcare_overlap_threshold) {
            return Err(ConfigError::Threshold(self.dontcare_overlap_threshold));
        }
        if !self.intersection_epsilon.is_finite() || self.intersection_epsilon < 0.0 {
            return Err(ConfigError::Epsilon(self.intersection_epsilon));
        }
        if self.dontcare_token.is_empty() {
            return Err(ConfigError::EmptyToken);
        }
        Ok(())
    }

    pub fn normalize_options(&self) -> NormalizeOptions {
        NormalizeOptions::case_fold(self.case_fold)
    }
}

/// An instance taking part in an evaluation, with the characters it still
/// holds. Once dead it never comes back.
#[derive(Debug, Clone)]
pub struct LiveInstance<'a> {
    pub source: &'a TextInstance,
    remaining: Vec<char>,
    pub alive: bool,
}

impl<'a> LiveInstance<'a> {
    pub fn new(source: &'a TextInstance, opts: &NormalizeOptions) -> Self {
        let remaining: Vec<char> = normalize_transcript(&source.transcript, opts).chars().collect();
        LiveInstance {
            source,
            remaining,
            alive: true,
        }
    }

    pub fn polygon(&self) -> &'a Polygon {
        &self.source.polygon
    }

    pub fn remaining_text(&self) -> String {
        self.remaining.iter().collect()
    }

    pub fn remaining_len(&self) -> usize {
        self.remaining.len()
    }
}

/// Relations found in one round, as indices into the live pools.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationSets {
    /// `(gt, det)` pairs.
    pub one_to_one: Vec<(usize, usize)>,
    /// `(gt, dets)` with at least two detections each.
    pub one_to_many: Vec<(usize, Vec<usize>)>,
}

impl RelationSets {
    pub fn is_empty(&self) -> bool {
        self.one_to_one.is_empty() && self.one_to_many.is_empty()
    }
}

/// Outcome for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageEvalResult {
    /// Removed characters; fractional when tied detections share credit.
    pub removed_weight: f64,
    pub gt_char_total: usize,
    pub det_char_total: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl ImageEvalResult {
    pub fn from_counts(removed_weight: f64, gt_char_total: usize, det_char_total: usize) -> Self {
        let s = ScoreTriple::from_counts(removed_weight, det_char_total as f64, gt_char_total as f64);
        ImageEvalResult {
            removed_weight,
            gt_char_total,
            det_char_total,
            precision: s.precision,
            recall: s.recall,
            fscore: s.fscore,
        }
    }

    pub fn scores(&self) -> ScoreTriple {
        ScoreTriple {
            precision: self.precision,
            recall: self.recall,
            fscore: self.fscore,
        }
    }
}

/// Micro-averaged corpus totals. `scores` is `None` for an empty corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusScore {
    pub images: usize,
    pub removed_weight: f64,
    pub gt_chars: usize,
    pub det_chars: usize,
    pub scores: Option<ScoreTriple>,
}

impl CorpusScore {
    pub fn aggregate<'r>(results: impl IntoIterator<Item = &'r ImageEvalResult>) -> Self {
        let mut out = CorpusScore {
            images: 0,
            removed_weight: 0.0,
            gt_chars: 0,
            det_chars: 0,
            scores: None,
        };
        for r in results {
            out.images += 1;
            out.removed_weight += r.removed_weight;
            out.gt_chars += r.gt_char_total;
            out.det_chars += r.det_char_total;
        }
        if out.images > 0 {
            out.scores = Some(ScoreTriple::from_counts(
                out.removed_weight,
                out.det_chars as f64,
                out.gt_chars as f64,
            ));
        }
        out
    }
}

/// Micro-average over a corpus: summed removals over summed character
/// totals.
pub fn aggregate(results: &[ImageEvalResult]) -> CorpusScore {
    CorpusScore::aggregate(results)
}

/// Drops don't-care ground truths, and every detection that lies mostly
/// inside one of them.
pub fn filter_dontcare<'a>(
    gts: &'a [TextInstance],
    dets: &'a [TextInstance],
    cfg: &EvalConfig,
) -> (Vec<&'a TextInstance>, Vec<&'a TextInstance>) {
    let dont_care: Vec<&TextInstance> = gts.iter().filter(|g| g.dont_care).collect();
    let kept_gts = gts.iter().filter(|g| !g.dont_care).collect();
    let kept_dets = dets
        .iter()
        .filter(|d| {
            !dont_care
                .iter()
                .any(|g| geometry::area_precision(&g.polygon, &d.polygon) > cfg.dontcare_overlap_threshold)
        })
        .collect();
    (kept_gts, kept_dets)
}

/// Reading order of two polygons, with tolerance on near-equal values.
fn reading_order(a: &Polygon, b: &Polygon) -> Ordering {
    let (da, db) = (a.origin_distance(), b.origin_distance());
    if (da - db).abs() > ORDER_TIE_EPS {
        return da.total_cmp(&db);
    }
    let (ca, cb) = (a.centroid(), b.centroid());
    if (ca.y - cb.y).abs() > ORDER_TIE_EPS {
        return ca.y.total_cmp(&cb.y);
    }
    if (ca.x - cb.x).abs() > ORDER_TIE_EPS {
        return ca.x.total_cmp(&cb.x);
    }
    Ordering::Equal
}

/// Index of the polygon read first: smallest centroid distance to the
/// top-left corner, then smaller centroid `y`, then smaller `x`, then the
/// earlier position.
///
/// # Panics
///
/// Panics if `polygons` is empty.
pub fn select_nearest_gt(polygons: &[&Polygon]) -> usize {
    assert!(!polygons.is_empty(), "select_nearest_gt needs at least one polygon");
    let mut best = 0;
    for (i, p) in polygons.iter().enumerate().skip(1) {
        if reading_order(p, polygons[best]) == Ordering::Less {
            best = i;
        }
    }
    best
}

/// The detections with the largest area recall on `gt`, each paired with
/// its share of the credit (`1 / count`). Tied detections come back in
/// reading order.
pub fn select_best_dets(gt: &Polygon, dets: &[&Polygon]) -> Vec<(usize, f64)> {
    let recalls: Vec<f64> = dets.iter().map(|d| geometry::area_recall(gt, d)).collect();
    let best = recalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut chosen: Vec<usize> = (0..dets.len())
        .filter(|&i| (recalls[i] - best).abs() <= RECALL_TIE_EPS)
        .collect();
    let mut ordered = Vec::with_capacity(chosen.len());
    while !chosen.is_empty() {
        let polys: Vec<&Polygon> = chosen.iter().map(|&i| dets[i]).collect();
        ordered.push(chosen.remove(select_nearest_gt(&polys)));
    }
    let weight = 1.0 / ordered.len() as f64;
    ordered.into_iter().map(|i| (i, weight)).collect()
}

/// Walks the detection's remaining characters left to right. Each one
/// found in the ground truth removes the leftmost occurrence there and
/// leaves the detection. Returns the credited weight.
pub fn character_removal(gt: &mut LiveInstance<'_>, det: &mut LiveInstance<'_>, weight: f64) -> f64 {
    let mut removed = 0.0;
    let mut kept = Vec::with_capacity(det.remaining.len());
    for &c in &det.remaining {
        match gt.remaining.iter().position(|&g| g == c) {
            Some(pos) => {
                gt.remaining.remove(pos);
                removed += weight;
            }
            None => kept.push(c),
        }
    }
    det.remaining = kept;
    if gt.remaining.is_empty() {
        gt.alive = false;
    }
    removed
}

/// Pairwise "overlaps" flags between the two pools, computed once.
struct OverlapTable {
    related: Vec<Vec<bool>>,
}

impl OverlapTable {
    fn new(gts: &[LiveInstance<'_>], dets: &[LiveInstance<'_>], epsilon: f64) -> Self {
        let related = gts
            .iter()
            .map(|g| {
                dets.iter()
                    .map(|d| geometry::intersects(g.polygon(), d.polygon(), epsilon))
                    .collect()
            })
            .collect();
        OverlapTable { related }
    }

    fn relations(&self, gts: &[LiveInstance<'_>], dets: &[LiveInstance<'_>]) -> RelationSets {
        let mut out = RelationSets::default();
        for (gi, g) in gts.iter().enumerate() {
            if !g.alive {
                continue;
            }
            let hits: Vec<usize> = dets
                .iter()
                .enumerate()
                .filter(|(di, d)| d.alive && self.related[gi][*di])
                .map(|(di, _)| di)
                .collect();
            match hits.len() {
                0 => {}
                1 => out.one_to_one.push((gi, hits[0])),
                _ => out.one_to_many.push((gi, hits)),
            }
        }
        out
    }
}

/// Relates every live ground truth to the live detections overlapping it.
pub fn inspect_relations(gts: &[LiveInstance<'_>], dets: &[LiveInstance<'_>], cfg: &EvalConfig) -> RelationSets {
    OverlapTable::new(gts, dets, cfg.intersection_epsilon).relations(gts, dets)
}

/// Full trace of an evaluation, for diagnostics and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    pub result: ImageEvalResult,
    /// Rounds run, including the final one that found no relation.
    pub rounds: usize,
    /// Leftover text of each kept ground truth, in input order.
    pub gt_remainders: Vec<String>,
    /// Leftover text of each kept detection, in input order.
    pub det_remainders: Vec<String>,
}

pub fn evaluate_image(gts: &[TextInstance], dets: &[TextInstance], cfg: &EvalConfig) -> ImageEvalResult {
    evaluate_image_traced(gts, dets, cfg).result
}

pub fn evaluate_image_traced(gts: &[TextInstance], dets: &[TextInstance], cfg: &EvalConfig) -> EvalTrace {
    let (gts, dets) = filter_dontcare(gts, dets, cfg);
    let norm = cfg.normalize_options();
    let mut gt_pool: Vec<LiveInstance> = gts.iter().map(|g| LiveInstance::new(g, &norm)).collect();
    let mut det_pool: Vec<LiveInstance> = dets.iter().map(|d| LiveInstance::new(d, &norm)).collect();
    let gt_total: usize = gt_pool.iter().map(LiveInstance::remaining_len).sum();
    let det_total: usize = det_pool.iter().map(LiveInstance::remaining_len).sum();
    for g in &mut gt_pool {
        g.alive = !g.remaining.is_empty();
    }

    let overlaps = OverlapTable::new(&gt_pool, &det_pool, cfg.intersection_epsilon);
    let mut removed = 0.0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let relations = overlaps.relations(&gt_pool, &det_pool);
        if relations.is_empty() {
            break;
        }
        if !relations.one_to_one.is_empty() {
            let mut pending = relations.one_to_one;
            while !pending.is_empty() {
                let polys: Vec<&Polygon> = pending.iter().map(|&(g, _)| gt_pool[g].polygon()).collect();
                let (g, d) = pending.remove(select_nearest_gt(&polys));
                removed += character_removal(&mut gt_pool[g], &mut det_pool[d], 1.0);
                det_pool[d].alive = false;
            }
        } else {
            let groups = relations.one_to_many;
            let polys: Vec<&Polygon> = groups.iter().map(|(g, _)| gt_pool[*g].polygon()).collect();
            let (g, candidates) = &groups[select_nearest_gt(&polys)];
            let det_polys: Vec<&Polygon> = candidates.iter().map(|&d| det_pool[d].polygon()).collect();
            for (k, weight) in select_best_dets(gt_pool[*g].polygon(), &det_polys) {
                let d = candidates[k];
                removed += character_removal(&mut gt_pool[*g], &mut det_pool[d], weight);
                det_pool[d].alive = false;
            }
        }
    }

    EvalTrace {
        result: ImageEvalResult::from_counts(removed, gt_total, det_total),
        rounds,
        gt_remainders: gt_pool.iter().map(LiveInstance::remaining_text).collect(),
        det_remainders: det_pool.iter().map(LiveInstance::remaining_text).collect(),
    }
}
