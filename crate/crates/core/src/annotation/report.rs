//! Evaluation reports.
//!
//! A report is a JSON object with the sections `config`, `per_image`,
//! `aggregate` and `warnings`, plus optional extra sections such as
//! `analysis`. Object keys are sorted and real numbers are written with
//! exactly six decimals, truncated toward zero, so identical inputs always
//! produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::evaluate::{CorpusScore, ImageEvalResult};
use crate::score::ScoreTriple;

#[derive(Debug, Error)]
#[error("cannot write report to {path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Formats `x` with six decimals, truncating the remaining digits.
///
/// ```
/// use popeval::annotation::report::format_fixed;
/// assert_eq!(format_fixed(6.0 / 7.0), "0.857142");
/// assert_eq!(format_fixed(1.0), "1.000000");
/// assert_eq!(format_fixed(-0.25), "-0.250000");
/// ```
pub fn format_fixed(x: f64) -> String {
    // Nine digits first so values like 0.29999999999 do not truncate to
    // 0.299999.
    let wide = format!("{x:.9}");
    let (int, frac) = wide.split_once('.').unwrap_or((&wide, "000000000"));
    let out = format!("{int}.{}", &frac[..6]);
    if out == "-0.000000" {
        "0.000000".to_owned()
    } else {
        out
    }
}

/// JSON number with six decimals, or `null` when `x` is not finite.
pub fn fixed(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    format_fixed(x)
        .parse::<Number>()
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn fixed_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, fixed)
}

pub fn scores_value(scores: Option<ScoreTriple>) -> Value {
    let mut m = Map::new();
    m.insert("precision".into(), fixed_opt(scores.map(|s| s.precision)));
    m.insert("recall".into(), fixed_opt(scores.map(|s| s.recall)));
    m.insert("fscore".into(), fixed_opt(scores.map(|s| s.fscore)));
    Value::Object(m)
}

fn merge(into: &mut Map<String, Value>, value: Value) {
    if let Value::Object(m) = value {
        into.extend(m);
    }
}

/// One `per_image` row of a character-level evaluation.
pub fn image_row(image_id: &str, result: &ImageEvalResult) -> Value {
    let mut m = Map::new();
    m.insert("image_id".into(), Value::String(image_id.to_owned()));
    m.insert("removed".into(), fixed(result.removed_weight));
    m.insert("gt_chars".into(), Value::from(result.gt_char_total));
    m.insert("det_chars".into(), Value::from(result.det_char_total));
    merge(&mut m, scores_value(Some(result.scores())));
    Value::Object(m)
}

/// The `aggregate` section of a character-level evaluation.
pub fn aggregate_value(score: &CorpusScore) -> Value {
    let mut m = Map::new();
    m.insert("images".into(), Value::from(score.images));
    m.insert("removed".into(), fixed(score.removed_weight));
    m.insert("gt_chars".into(), Value::from(score.gt_chars));
    m.insert("det_chars".into(), Value::from(score.det_chars));
    merge(&mut m, scores_value(score.scores));
    Value::Object(m)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub config: Map<String, Value>,
    pub per_image: Vec<Value>,
    pub aggregate: Value,
    pub warnings: Vec<String>,
    /// Additional top-level sections, e.g. `analysis` or `correlation`.
    pub sections: Map<String, Value>,
}

impl Report {
    /// Character-level report over `results`, which must already be in
    /// image-id order.
    pub fn popeval(config: Map<String, Value>, results: &[(String, ImageEvalResult)], warnings: Vec<String>) -> Self {
        let per_image = results.iter().map(|(id, r)| image_row(id, r)).collect();
        let score = CorpusScore::aggregate(results.iter().map(|(_, r)| r));
        Report {
            config,
            per_image,
            aggregate: aggregate_value(&score),
            warnings,
            sections: Map::new(),
        }
    }

    pub fn to_value(&self) -> Value {
        let mut m = self.sections.clone();
        m.insert("config".into(), Value::Object(self.config.clone()));
        m.insert("per_image".into(), Value::Array(self.per_image.clone()));
        m.insert("aggregate".into(), self.aggregate.clone());
        m.insert(
            "warnings".into(),
            Value::Array(self.warnings.iter().cloned().map(Value::String).collect()),
        );
        Value::Object(m)
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("JSON values always serialize");
        s.push('\n');
        s
    }
}

pub fn write_report(report: &Report, destination: &Path) -> Result<(), ReportError> {
    fs::write(destination, report.render()).map_err(|source| ReportError {
        path: destination.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(removed: f64, gt: usize, det: usize) -> ImageEvalResult {
        ImageEvalResult::from_counts(removed, gt, det)
    }

    #[test]
    fn six_decimals() {
        assert_eq!(format_fixed(0.3), "0.300000");
        assert_eq!(format_fixed(0.1 + 0.2), "0.300000");
        assert_eq!(format_fixed(3.0 / 7.0), "0.428571");
        assert_eq!(format_fixed(-1e-12), "0.000000");
        assert_eq!(fixed(f64::NAN), Value::Null);
    }

    #[test]
    fn single_image_report() {
        let report = Report::popeval(Map::new(), &[("img_1".into(), result(6.0, 7, 6))], vec![]);
        let text = report.render();
        assert!(text.contains("\"precision\": 1.000000"), "{text}");
        assert!(text.contains("\"recall\": 0.857142"), "{text}");
        // Sorted keys: aggregate < config < per_image < warnings.
        let a = text.find("\"aggregate\"").unwrap();
        let c = text.find("\"config\"").unwrap();
        let p = text.find("\"per_image\"").unwrap();
        let w = text.find("\"warnings\"").unwrap();
        assert!(a < c && c < p && p < w);
    }

    #[test]
    fn empty_corpus_has_null_scores() {
        let report = Report::popeval(Map::new(), &[], vec![]);
        let v = report.to_value();
        assert_eq!(v["aggregate"]["images"], Value::from(0));
        assert_eq!(v["aggregate"]["gt_chars"], Value::from(0));
        assert_eq!(v["aggregate"]["precision"], Value::Null);
        assert_eq!(v["aggregate"]["fscore"], Value::Null);
    }

    #[test]
    fn deterministic_output() {
        let rows = vec![
            ("a".to_string(), result(6.0, 7, 6)),
            ("b".to_string(), result(0.0, 3, 0)),
        ];
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.json"), dir.path().join("2.json"));
        write_report(&Report::popeval(Map::new(), &rows, vec!["w".into()]), &p1).unwrap();
        write_report(&Report::popeval(Map::new(), &rows, vec!["w".into()]), &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn io_errors_name_the_destination() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("report.json");
        let err = write_report(&Report::default(), &bad).unwrap_err();
        assert!(err.to_string().contains("report.json"));
    }
}
