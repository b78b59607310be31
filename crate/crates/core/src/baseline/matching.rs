//! Greedy one-to-one matching at an IoU threshold.

use crate::annotation::TextInstance;
use crate::geometry::{iou, Polygon};
use crate::score::ScoreTriple;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt: usize,
    pub det: usize,
    pub iou: f64,
}

/// One-to-one assignment between ground truths and detections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gts: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

impl Matching {
    pub fn det_for_gt(&self, gt: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.gt == gt).map(|p| p.det)
    }
}

/// Visits ground truths in input order and pairs each with the unused
/// detection of highest IoU strictly above `threshold`. Split and merged
/// detections rarely clear the threshold and stay unmatched.
pub fn match_iou(gts: &[&Polygon], dets: &[&Polygon], threshold: f64) -> Matching {
    let mut used = vec![false; dets.len()];
    let mut out = Matching::default();
    for (g, gp) in gts.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (d, dp) in dets.iter().enumerate() {
            if used[d] {
                continue;
            }
            let v = iou(gp, dp);
            if v > threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((d, v));
            }
        }
        match best {
            Some((d, v)) => {
                used[d] = true;
                out.pairs.push(MatchedPair { gt: g, det: d, iou: v });
            }
            None => out.unmatched_gts.push(g),
        }
    }
    out.unmatched_dets = (0..dets.len()).filter(|&d| !used[d]).collect();
    out
}

pub fn match_instances<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
) -> Matching {
    let g: Vec<&Polygon> = gts.iter().map(|i| &i.as_ref().polygon).collect();
    let d: Vec<&Polygon> = dets.iter().map(|i| &i.as_ref().polygon).collect();
    match_iou(&g, &d, threshold)
}

/// Counts behind detection-only precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionCounts {
    pub matched: usize,
    pub gts: usize,
    pub dets: usize,
}

impl DetectionCounts {
    pub fn add(&mut self, other: DetectionCounts) {
        self.matched += other.matched;
        self.gts += other.gts;
        self.dets += other.dets;
    }

    pub fn scores(&self) -> ScoreTriple {
        ScoreTriple::from_counts(self.matched as f64, self.dets as f64, self.gts as f64)
    }
}

pub fn detection_counts<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
) -> DetectionCounts {
    DetectionCounts {
        matched: match_instances(gts, dets, threshold).pairs.len(),
        gts: gts.len(),
        dets: dets.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(l: f64, t: f64, r: f64, b: f64) -> Polygon {
        Polygon::rect(l, t, r, b).unwrap()
    }

    #[test]
    fn identical_boxes() {
        let a = rect(0.0, 0.0, 10.0, 10.0);
        let m = match_iou(&[&a], &[&a], 0.5);
        assert_eq!(
            m.pairs,
            vec![MatchedPair {
                gt: 0,
                det: 0,
                iou: 1.0
            }]
        );
    }

    #[test]
    fn picks_highest_iou() {
        let gt = rect(0.0, 0.0, 10.0, 10.0);
        // IoU 0.6: [0,10]x[0,6] inside the GT; IoU 0.9: [0,10]x[0,9].
        let weak = rect(0.0, 0.0, 10.0, 6.0);
        let strong = rect(0.0, 0.0, 10.0, 9.0);
        let m = match_iou(&[&gt], &[&weak, &strong], 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].det, 1);
        assert!((m.pairs[0].iou - 0.9).abs() < 1e-12);
        assert_eq!(m.unmatched_dets, vec![0]);
    }

    #[test]
    fn split_detections_are_ignored() {
        // Each half-plus-a-bit covers 45% of the GT and nothing else.
        let gt = rect(0.0, 0.0, 100.0, 10.0);
        let left = rect(0.0, 0.0, 45.0, 10.0);
        let right = rect(55.0, 0.0, 100.0, 10.0);
        let m = match_iou(&[&gt], &[&left, &right], 0.5);
        assert!((iou(&gt, &left) - 0.45).abs() < 1e-12);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gts, vec![0]);
        assert_eq!(m.unmatched_dets, vec![0, 1]);
    }

    fn boxes() -> impl Strategy<Value = Vec<Polygon>> {
        prop::collection::vec((0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64), 0..6)
            .prop_map(|v| v.into_iter().map(|(x, y, w, h)| rect(x, y, x + w, y + h)).collect())
    }

    proptest! {
        #[test]
        fn matching_invariants(gts in boxes(), dets in boxes(), t in 0.0..0.9f64, dt in 0.0..0.1f64) {
            let g: Vec<&Polygon> = gts.iter().collect();
            let d: Vec<&Polygon> = dets.iter().collect();
            let m = match_iou(&g, &d, t);
            let mut seen_g = vec![false; g.len()];
            let mut seen_d = vec![false; d.len()];
            for p in &m.pairs {
                prop_assert!(p.iou > t);
                prop_assert!(!seen_g[p.gt] && !seen_d[p.det]);
                seen_g[p.gt] = true;
                seen_d[p.det] = true;
            }
            prop_assert_eq!(m.pairs.len() + m.unmatched_gts.len(), g.len());
            prop_assert_eq!(m.pairs.len() + m.unmatched_dets.len(), d.len());
            let stricter = match_iou(&g, &d, t + dt);
            prop_assert!(stricter.pairs.len() <= m.pairs.len());
        }
    }
}
