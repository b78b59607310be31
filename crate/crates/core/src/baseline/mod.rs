//! Box-level metrics used as points of comparison: IoU matching, detection
//! precision/recall, exact-match end-to-end scoring with an optional
//! vocabulary, one minus normalized edit distance, and average precision.
//!
//! All functions expect don't-care regions to have been filtered already
//! (see [`crate::evaluate::filter_dontcare`]). Each metric comes as a
//! per-image function plus an accumulator for corpus-level totals.

mod ap;
mod e2e;
mod levenshtein;
mod matching;

pub use ap::{average_precision, ranked_hits, ApError, RankedHits};
pub use e2e::{
    exact_match_counts, exact_match_e2e, ned_terms, one_minus_ned, EndToEndCounts, NedTerms, Vocabulary,
    VocabularyError,
};
pub use levenshtein::levenshtein;
pub use matching::{detection_counts, match_instances, match_iou, DetectionCounts, MatchedPair, Matching};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
