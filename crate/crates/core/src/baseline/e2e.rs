//! Exact-match end-to-end scoring and one minus normalized edit distance.

use std::collections::BTreeSet;

use thiserror::Error;

use super::levenshtein::levenshtein;
use super::matching::match_instances;
use crate::annotation::{normalize_transcript, NormalizeOptions, TextInstance};
use crate::score::ScoreTriple;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VocabularyError {
    #[error("vocabulary file is not valid UTF-8")]
    Utf8,
    #[error("vocabulary is empty")]
    Empty,
}

/// A flat set of accepted words, stored normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: BTreeSet<String>,
    opts: NormalizeOptions,
}

impl Vocabulary {
    pub fn from_words<I, S>(words: I, opts: NormalizeOptions) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| normalize_transcript(w.as_ref().trim(), &opts))
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(VocabularyError::Empty);
        }
        Ok(Vocabulary { words, opts })
    }

    /// One word per line, UTF-8.
    pub fn parse(bytes: &[u8], opts: NormalizeOptions) -> Result<Self, VocabularyError> {
        let text = std::str::from_utf8(bytes).map_err(|_| VocabularyError::Utf8)?;
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        Vocabulary::from_words(text.lines(), opts)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&normalize_transcript(word, &self.opts))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EndToEndCounts {
    pub true_positives: usize,
    pub gts: usize,
    pub dets: usize,
}

impl EndToEndCounts {
    pub fn add(&mut self, other: EndToEndCounts) {
        self.true_positives += other.true_positives;
        self.gts += other.gts;
        self.dets += other.dets;
    }

    pub fn scores(&self) -> ScoreTriple {
        ScoreTriple::from_counts(self.true_positives as f64, self.dets as f64, self.gts as f64)
    }
}

/// A matched pair is correct only when the normalized transcripts are
/// identical; partial matches earn nothing. With a vocabulary, ground
/// truths whose word is not in it are excluded along with the detection
/// matched to them.
pub fn exact_match_counts<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    vocab: Option<&Vocabulary>,
    opts: &NormalizeOptions,
) -> EndToEndCounts {
    let matching = match_instances(gts, dets, threshold);
    let excluded: Vec<bool> = gts
        .iter()
        .map(|g| vocab.is_some_and(|v| !v.contains(&g.as_ref().transcript)))
        .collect();
    let mut counts = EndToEndCounts {
        true_positives: 0,
        gts: excluded.iter().filter(|e| !**e).count(),
        dets: dets.len(),
    };
    for p in &matching.pairs {
        if excluded[p.gt] {
            counts.dets -= 1;
            continue;
        }
        let g = normalize_transcript(&gts[p.gt].as_ref().transcript, opts);
        let d = normalize_transcript(&dets[p.det].as_ref().transcript, opts);
        if g == d {
            counts.true_positives += 1;
        }
    }
    counts
}

pub fn exact_match_e2e<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    vocab: Option<&Vocabulary>,
    opts: &NormalizeOptions,
) -> ScoreTriple {
    exact_match_counts(gts, dets, threshold, vocab, opts).scores()
}

/// Running sum of normalized edit distances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NedTerms {
    pub sum: f64,
    pub count: usize,
}

impl NedTerms {
    pub fn add(&mut self, other: NedTerms) {
        self.sum += other.sum;
        self.count += other.count;
    }

    /// `1 - mean(NED)`; 1 when there was nothing to compare.
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            (1.0 - self.sum / self.count as f64).clamp(0.0, 1.0)
        }
    }
}

fn ned(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / longest as f64
    }
}

/// One term per matched pair, plus a term of 1 for every unmatched ground
/// truth (read as a blank recognition) and every unmatched detection.
pub fn ned_terms<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    opts: &NormalizeOptions,
) -> NedTerms {
    let matching = match_instances(gts, dets, threshold);
    let mut terms = NedTerms {
        sum: (matching.unmatched_gts.len() + matching.unmatched_dets.len()) as f64,
        count: matching.unmatched_gts.len() + matching.unmatched_dets.len(),
    };
    for p in &matching.pairs {
        let g = normalize_transcript(&gts[p.gt].as_ref().transcript, opts);
        let d = normalize_transcript(&dets[p.det].as_ref().transcript, opts);
        terms.sum += ned(&g, &d);
        terms.count += 1;
    }
    terms
}

pub fn one_minus_ned<G: AsRef<TextInstance>, D: AsRef<TextInstance>>(
    gts: &[G],
    dets: &[D],
    threshold: f64,
    opts: &NormalizeOptions,
) -> f64 {
    ned_terms(gts, dets, threshold, opts).value()
}
