//! Precision/recall/F triples and the conventions for empty denominators.

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl ScoreTriple {
    /// Builds scores from a true-positive mass and the two totals.
    ///
    /// Nothing predicted and nothing to find scores 1 on both sides; an empty
    /// side facing a nonempty one scores 0.
    pub fn from_counts(true_positive: f64, predicted: f64, actual: f64) -> Self {
        let ratio = |total: f64, other: f64| {
            if total > 0.0 {
                (true_positive / total).clamp(0.0, 1.0)
            } else if other > 0.0 {
                0.0
            } else {
                1.0
            }
        };
        let precision = ratio(predicted, actual);
        let recall = ratio(actual, predicted);
        ScoreTriple {
            precision,
            recall,
            fscore: harmonic_mean(precision, recall),
        }
    }
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}
