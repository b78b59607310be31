//! Annotation and submission files: parsing, corpus assembly, text
//! normalization and report output.

mod corpus;
mod parse;
pub mod report;

use crate::geometry::Polygon;

pub use corpus::{image_id_from_path, load_dir, load_pairs, read_manifest, CorpusError, ImagePair, LoadedPairs};
pub use parse::{
    parse_charlevel_gt, parse_detections, parse_gt, parse_icdar2013_gt, parse_icdar2015_gt, serialize, Format,
    ParseError, ParseErrorKind, ParseOptions,
};

pub const DEFAULT_DONTCARE_TOKEN: &str = "###";

/// One annotated or predicted text region.
#[derive(Debug, Clone, PartialEq)]
pub struct TextInstance {
    pub polygon: Polygon,
    /// Raw transcript as read from the file. Empty for don't-care regions.
    pub transcript: String,
    pub dont_care: bool,
    pub confidence: Option<f64>,
}

impl TextInstance {
    pub fn new(polygon: Polygon, transcript: impl Into<String>) -> Self {
        TextInstance {
            polygon,
            transcript: transcript.into(),
            dont_care: false,
            confidence: None,
        }
    }

    pub fn dont_care(polygon: Polygon) -> Self {
        TextInstance {
            polygon,
            transcript: String::new(),
            dont_care: true,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }
}

impl AsRef<TextInstance> for TextInstance {
    fn as_ref(&self) -> &TextInstance {
        self
    }
}

/// All instances of one image, either ground truth or a submission.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageAnnotation {
    pub image_id: String,
    pub instances: Vec<TextInstance>,
}

/// Transcript normalization switches. Transcripts are stored raw and
/// normalized only when a metric compares them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NormalizeOptions {
    pub case_fold: bool,
    pub strip_surrounding_whitespace: bool,
    pub alphanumeric_only: bool,
}

impl NormalizeOptions {
    pub fn case_fold(case_fold: bool) -> Self {
        NormalizeOptions {
            case_fold,
            ..Default::default()
        }
    }
}

/// Applies `opts` to `text`. Idempotent for every option combination.
pub fn normalize_transcript(text: &str, opts: &NormalizeOptions) -> String {
    let mut out: String = if opts.strip_surrounding_whitespace {
        text.trim().to_owned()
    } else {
        text.to_owned()
    };
    if opts.case_fold {
        out = out.to_lowercase();
    }
    if opts.alphanumeric_only {
        out.retain(char::is_alphanumeric);
    }
    out
}
