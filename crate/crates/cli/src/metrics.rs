//! Per-image scoring and corpus aggregation for every metric the CLI offers.

use clap::ValueEnum;
use serde_json::{Map, Value};

use popeval::annotation::report::{aggregate_value, fixed, format_fixed, image_row, scores_value};
use popeval::annotation::ImagePair;
use popeval::baseline::{
    detection_counts, exact_match_counts, ned_terms, ranked_hits, DetectionCounts, EndToEndCounts, NedTerms,
    RankedHits, Vocabulary,
};
use popeval::evaluate::{evaluate_image, filter_dontcare, CorpusScore};
use popeval::{EvalConfig, ImageEvalResult, NormalizeOptions, ScoreTriple, TextInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Metric {
    /// Character removal.
    Popeval,
    /// Exact transcript match on IoU-matched boxes.
    E2e,
    /// One minus the mean normalized edit distance.
    #[value(name = "1-ned")]
    OneMinusNed,
    /// Average precision over confidence-ranked detections.
    Ap,
    /// Box matching only, transcripts ignored.
    Detection,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Popeval => "popeval",
            Metric::E2e => "e2e",
            Metric::OneMinusNed => "1-ned",
            Metric::Ap => "ap",
            Metric::Detection => "detection",
        }
    }
}

pub struct Settings {
    pub eval: EvalConfig,
    pub iou_threshold: f64,
    pub vocab: Option<Vocabulary>,
}

impl Settings {
    fn norm(&self) -> NormalizeOptions {
        self.eval.normalize_options()
    }
}

pub enum ImageScore {
    Chars(ImageEvalResult),
    EndToEnd(EndToEndCounts),
    Detection(DetectionCounts),
    Ned(NedTerms),
    Ap(RankedHits),
}

/// Scores one image. Box-level metrics see the same don't-care filtering
/// as character removal.
pub fn score_image(metric: Metric, pair: &ImagePair, s: &Settings) -> Result<ImageScore, String> {
    let (gt, det) = (&pair.gt.instances, &pair.det.instances);
    if metric == Metric::Popeval {
        return Ok(ImageScore::Chars(evaluate_image(gt, det, &s.eval)));
    }
    let (gts, dets): (Vec<&TextInstance>, Vec<&TextInstance>) = filter_dontcare(gt, det, &s.eval);
    let norm = s.norm();
    Ok(match metric {
        Metric::Popeval => unreachable!(),
        Metric::E2e => ImageScore::EndToEnd(exact_match_counts(
            &gts,
            &dets,
            s.iou_threshold,
            s.vocab.as_ref(),
            &norm,
        )),
        Metric::Detection => ImageScore::Detection(detection_counts(&gts, &dets, s.iou_threshold)),
        Metric::OneMinusNed => ImageScore::Ned(ned_terms(&gts, &dets, s.iou_threshold, &norm)),
        Metric::Ap => ImageScore::Ap(
            ranked_hits(&gts, &dets, s.iou_threshold, &norm).map_err(|e| format!("image {}: {e}", pair.image_id))?,
        ),
    })
}

fn counts_row(m: &mut Map<String, Value>, tp: usize, gts: usize, dets: usize, key: &str) {
    m.insert(key.into(), Value::from(tp));
    m.insert("gts".into(), Value::from(gts));
    m.insert("dets".into(), Value::from(dets));
    let scores = ScoreTriple::from_counts(tp as f64, dets as f64, gts as f64);
    if let Value::Object(s) = scores_value(Some(scores)) {
        m.extend(s);
    }
}

/// The single number used when metrics are compared per image.
pub fn headline(score: &ImageScore) -> f64 {
    match score {
        ImageScore::Chars(r) => r.fscore,
        ImageScore::EndToEnd(c) => c.scores().fscore,
        ImageScore::Detection(c) => c.scores().fscore,
        ImageScore::Ned(t) => t.value(),
        ImageScore::Ap(h) => h.average_precision(),
    }
}

pub fn row(image_id: &str, score: &ImageScore) -> Value {
    if let ImageScore::Chars(r) = score {
        return image_row(image_id, r);
    }
    let mut m = Map::new();
    m.insert("image_id".into(), Value::String(image_id.to_owned()));
    match score {
        ImageScore::Chars(_) => unreachable!(),
        ImageScore::EndToEnd(c) => counts_row(&mut m, c.true_positives, c.gts, c.dets, "true_positives"),
        ImageScore::Detection(c) => counts_row(&mut m, c.matched, c.gts, c.dets, "matched"),
        ImageScore::Ned(t) => {
            m.insert("terms".into(), Value::from(t.count));
            m.insert("value".into(), fixed(t.value()));
        }
        ImageScore::Ap(h) => {
            m.insert("gts".into(), Value::from(h.gts));
            m.insert("dets".into(), Value::from(h.hits.len()));
            m.insert("value".into(), fixed(h.average_precision()));
        }
    }
    Value::Object(m)
}

fn triple_summary(s: Option<ScoreTriple>) -> String {
    match s {
        Some(s) => format!(
            "precision={} recall={} fscore={}",
            format_fixed(s.precision),
            format_fixed(s.recall),
            format_fixed(s.fscore)
        ),
        None => "precision=null recall=null fscore=null".to_owned(),
    }
}

fn value_summary(name: &str, v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{name}={}", format_fixed(v)),
        None => format!("{name}=null"),
    }
}

pub struct Aggregate {
    pub value: Value,
    pub summary: String,
}

/// Corpus totals, micro-averaged for every metric.
pub fn aggregate(metric: Metric, scores: &[ImageScore]) -> Aggregate {
    let images = scores.len();
    let mut m = Map::new();
    m.insert("images".into(), Value::from(images));
    let summary = match metric {
        Metric::Popeval => {
            let results: Vec<&ImageEvalResult> = scores
                .iter()
                .map(|s| match s {
                    ImageScore::Chars(r) => r,
                    _ => unreachable!(),
                })
                .collect();
            let corpus = CorpusScore::aggregate(results);
            if let Value::Object(v) = aggregate_value(&corpus) {
                m.extend(v);
            }
            triple_summary(corpus.scores)
        }
        Metric::E2e | Metric::Detection => {
            let (mut tp, mut gts, mut dets) = (0, 0, 0);
            for s in scores {
                let (a, b, c) = match s {
                    ImageScore::EndToEnd(c) => (c.true_positives, c.gts, c.dets),
                    ImageScore::Detection(c) => (c.matched, c.gts, c.dets),
                    _ => unreachable!(),
                };
                tp += a;
                gts += b;
                dets += c;
            }
            let key = if metric == Metric::E2e {
                "true_positives"
            } else {
                "matched"
            };
            let triple = (images > 0).then(|| ScoreTriple::from_counts(tp as f64, dets as f64, gts as f64));
            m.insert(key.into(), Value::from(tp));
            m.insert("gts".into(), Value::from(gts));
            m.insert("dets".into(), Value::from(dets));
            if let Value::Object(v) = scores_value(triple) {
                m.extend(v);
            }
            triple_summary(triple)
        }
        Metric::OneMinusNed => {
            let mut total = NedTerms::default();
            for s in scores {
                if let ImageScore::Ned(t) = s {
                    total.add(*t);
                }
            }
            let v = (images > 0).then(|| total.value());
            m.insert("terms".into(), Value::from(total.count));
            m.insert("value".into(), v.map_or(Value::Null, fixed));
            value_summary("1-ned", v)
        }
        Metric::Ap => {
            let mut total = RankedHits::default();
            for s in scores {
                if let ImageScore::Ap(h) = s {
                    total.extend(h.clone());
                }
            }
            let v = (images > 0).then(|| total.average_precision());
            m.insert("gts".into(), Value::from(total.gts));
            m.insert("dets".into(), Value::from(total.hits.len()));
            m.insert("value".into(), v.map_or(Value::Null, fixed));
            value_summary("ap", v)
        }
    };
    Aggregate {
        value: Value::Object(m),
        summary,
    }
}
