//! Average precision over confidence-ranked detections.

use thiserror::Error;

use crate::annotation::{normalize_transcript, NormalizeOptions, TextInstance};
use crate::geometry::iou;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApError {
    #[error("detection {index} has no confidence; average precision needs one per detection")]
    MissingConfidence { index: usize },
}

/// Per-detection outcomes in rank order, plus the number of ground truths.
/// Accumulates across images with [`RankedHits::extend`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedHits {
    /// `(confidence, correct)`.
    pub hits: Vec<(f64, bool)>,
    pub gts: usize,
}

impl RankedHits {
    pub fn extend(&mut self, other: RankedHits) {
        self.hits.extend(other.hits);
        self.gts += other.gts;
    }

    /// All-point interpolated area under the precision/recall curve.
    ///
    /// Detections are ranked by descending confidence; equal confidences
    /// keep their accumulation order. Without ground truth the result is 1
    /// if nothing was detected and 0 otherwise.
    pub fn average_precision(&self) -> f64 {
        if self.gts == 0 {
            return if self.hits.is_empty() { 1.0 } else { 0.0 };
        }
        let mut order: Vec<usize> = (0..self.hits.len()).collect();
        order.sort_by(|&a, &b| self.hits[b].0.total_cmp(&self.hits[a].0));

        let mut points = Vec::with_capacity(order.len());
        let mut tp = 0usize;
        for (rank, &i) in order.iter().enumerate() {
            if self.hits[i].1 {
                tp += 1;
            }
            points.push((tp as f64 / self.gts as f64, tp as f64 / (rank + 1) as f64));
        }
        // Precision envelope: best precision at this recall or beyond.
        for k in (0..points.len().saturating_sub(1)).rev() {
            points[k].1 = points[k].1.max(points[k + 1].1);
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (recall, precision) in points {
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        ap.clamp(0.0, 1.0)
    }
}

/// Ranks one image's detections and marks each correct when it overlaps an
/// unused ground truth above `threshold` and reads the same after
/// normalization. Among qualifying ground truths the highest IoU wins.
pub fn ranked_hits<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    opts: &NormalizeOptions,
) -> Result<RankedHits, ApError> {
    let mut confidences = Vec::with_capacity(dets.len());
    for (index, d) in dets.iter().enumerate() {
        confidences.push(d.as_ref().confidence.ok_or(ApError::MissingConfidence { index })?);
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));

    let gt_text: Vec<String> = gts
        .iter()
        .map(|g| normalize_transcript(&g.as_ref().transcript, opts))
        .collect();
    let mut used = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(dets.len());
    for d in order {
        let det = dets[d].as_ref();
        let text = normalize_transcript(&det.transcript, opts);
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] || gt_text[g] != text {
                continue;
            }
            let v = iou(&gt.as_ref().polygon, &det.polygon);
            if v > threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
        }
        hits.push((confidences[d], best.is_some()));
    }
    Ok(RankedHits { hits, gts: gts.len() })
}

pub fn average_precision<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    opts: &NormalizeOptions,
) -> Result<f64, ApError> {
    Ok(ranked_hits(gts, dets, threshold, opts)?.average_precision())
}
