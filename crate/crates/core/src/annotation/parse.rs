//! Line grammars for ICDAR-style ground-truth and submission files.
//!
//! * ICDAR 2015 (and the character-level variant):
//!   `x1,y1,x2,y2,x3,y3,x4,y4,transcript`. Only the first eight commas
//!   separate fields, so transcripts may contain commas.
//! * ICDAR 2013: `left, top, right, bottom, "transcript"`.
//!
//! Submissions use the same geometry followed by an optional confidence
//! field and the transcript. Files may start with a byte-order mark, use
//! either line ending and contain blank lines.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{ImageAnnotation, TextInstance, DEFAULT_DONTCARE_TOKEN};
use crate::geometry::{GeometryError, Point, Polygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Icdar2013,
    Icdar2015,
    /// ICDAR 2015 lines whose transcripts are single characters.
    CharLevel,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Icdar2013 => "icdar2013",
            Format::Icdar2015 => "icdar2015",
            Format::CharLevel => "charlevel",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    pub dontcare_token: String,
    /// Submission lines carry a confidence field before the transcript.
    pub confidence: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            dontcare_token: DEFAULT_DONTCARE_TOKEN.to_owned(),
            confidence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number; 0 when the problem concerns the whole file.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("file is not valid UTF-8")]
    Utf8,
    #[error("expected {expected} comma-separated fields")]
    MissingFields { expected: usize },
    #[error("malformed coordinate {0:?}")]
    BadCoordinate(String),
    #[error("malformed confidence {0:?}")]
    BadConfidence(String),
    #[error("box has right <= left or bottom <= top")]
    InvertedBox,
    #[error("character-level transcript {0:?} is not a single character")]
    NotSingleCharacter(String),
    #[error("empty transcript")]
    EmptyTranscript,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    GroundTruth,
    Detection { confidence: bool },
}

fn lines(bytes: &[u8]) -> Result<impl Iterator<Item = (usize, &str)>, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError {
        line: 0,
        kind: ParseErrorKind::Utf8,
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    Ok(text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty()))
}

fn coordinate(field: &str, integer: bool) -> Result<f64, ParseErrorKind> {
    let field = field.trim();
    let bad = || ParseErrorKind::BadCoordinate(field.to_owned());
    if integer {
        field.parse::<i64>().map(|v| v as f64).map_err(|_| bad())
    } else {
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(bad()),
        }
    }
}

fn confidence(field: &str) -> Result<f64, ParseErrorKind> {
    match field.trim().parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(ParseErrorKind::BadConfidence(field.trim().to_owned())),
    }
}

fn unquote(field: &str) -> String {
    let t = field.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        let inner = &t[1..t.len() - 1];
        let mut out = String::with_capacity(inner.len());
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some(next @ ('"' | '\\')) => out.push(next),
                    Some(other) => {
                        out.push('\\');
                        out.push(other);
                    }
                    None => out.push('\\'),
                }
            } else {
                out.push(c);
            }
        }
        out
    } else {
        t.to_owned()
    }
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn finish(
    polygon: Polygon,
    transcript: String,
    conf: Option<f64>,
    role: Role,
    opts: &ParseOptions,
) -> Result<TextInstance, ParseErrorKind> {
    if role == Role::GroundTruth && transcript.trim() == opts.dontcare_token {
        return Ok(TextInstance::dont_care(polygon));
    }
    if transcript.is_empty() {
        return Err(ParseErrorKind::EmptyTranscript);
    }
    Ok(TextInstance {
        polygon,
        transcript,
        dont_care: false,
        confidence: conf,
    })
}

fn parse_quad_line(line: &str, role: Role, opts: &ParseOptions) -> Result<TextInstance, ParseErrorKind> {
    let with_conf = matches!(role, Role::Detection { confidence: true });
    let fields = if with_conf { 10 } else { 9 };
    let parts: Vec<&str> = line.splitn(fields, ',').collect();
    if parts.len() < fields {
        return Err(ParseErrorKind::MissingFields { expected: fields });
    }
    let integer = role == Role::GroundTruth;
    let mut vertices = Vec::with_capacity(4);
    for pair in parts[..8].chunks(2) {
        vertices.push(Point::new(coordinate(pair[0], integer)?, coordinate(pair[1], integer)?));
    }
    let polygon = Polygon::new(vertices)?;
    let conf = if with_conf { Some(confidence(parts[8])?) } else { None };
    finish(polygon, parts[fields - 1].to_owned(), conf, role, opts)
}

fn parse_rect_line(line: &str, role: Role, opts: &ParseOptions) -> Result<TextInstance, ParseErrorKind> {
    let with_conf = matches!(role, Role::Detection { confidence: true });
    let fields = if with_conf { 6 } else { 5 };
    let parts: Vec<&str> = line.splitn(fields, ',').collect();
    if parts.len() < fields {
        return Err(ParseErrorKind::MissingFields { expected: fields });
    }
    let integer = role == Role::GroundTruth;
    let left = coordinate(parts[0], integer)?;
    let top = coordinate(parts[1], integer)?;
    let right = coordinate(parts[2], integer)?;
    let bottom = coordinate(parts[3], integer)?;
    if right <= left || bottom <= top {
        return Err(ParseErrorKind::InvertedBox);
    }
    let polygon = Polygon::rect(left, top, right, bottom)?;
    let conf = if with_conf { Some(confidence(parts[4])?) } else { None };
    finish(polygon, unquote(parts[fields - 1]), conf, role, opts)
}

fn parse_with(
    image_id: &str,
    bytes: &[u8],
    format: Format,
    role: Role,
    opts: &ParseOptions,
) -> Result<ImageAnnotation, ParseError> {
    let mut instances = Vec::new();
    for (line_no, line) in lines(bytes)? {
        let parsed = match format {
            Format::Icdar2013 => parse_rect_line(line, role, opts),
            Format::Icdar2015 | Format::CharLevel => parse_quad_line(line, role, opts),
        };
        let instance = parsed.map_err(|kind| ParseError { line: line_no, kind })?;
        if format == Format::CharLevel
            && role == Role::GroundTruth
            && !instance.dont_care
            && instance.transcript.chars().count() != 1
        {
            return Err(ParseError {
                line: line_no,
                kind: ParseErrorKind::NotSingleCharacter(instance.transcript),
            });
        }
        instances.push(instance);
    }
    Ok(ImageAnnotation {
        image_id: image_id.to_owned(),
        instances,
    })
}

pub fn parse_icdar2015_gt(image_id: &str, bytes: &[u8], opts: &ParseOptions) -> Result<ImageAnnotation, ParseError> {
    parse_with(image_id, bytes, Format::Icdar2015, Role::GroundTruth, opts)
}

pub fn parse_icdar2013_gt(image_id: &str, bytes: &[u8], opts: &ParseOptions) -> Result<ImageAnnotation, ParseError> {
    parse_with(image_id, bytes, Format::Icdar2013, Role::GroundTruth, opts)
}

/// ICDAR 2015 grammar with exactly one character per non-don't-care line.
pub fn parse_charlevel_gt(image_id: &str, bytes: &[u8], opts: &ParseOptions) -> Result<ImageAnnotation, ParseError> {
    parse_with(image_id, bytes, Format::CharLevel, Role::GroundTruth, opts)
}

pub fn parse_gt(
    image_id: &str,
    bytes: &[u8],
    format: Format,
    opts: &ParseOptions,
) -> Result<ImageAnnotation, ParseError> {
    parse_with(image_id, bytes, format, Role::GroundTruth, opts)
}

/// Parses a submission file. Coordinates may be real-valued; when
/// `opts.confidence` is set the field before the transcript is the
/// confidence. Detections never carry the don't-care flag.
pub fn parse_detections(
    image_id: &str,
    bytes: &[u8],
    format: Format,
    opts: &ParseOptions,
) -> Result<ImageAnnotation, ParseError> {
    let role = Role::Detection {
        confidence: opts.confidence,
    };
    parse_with(image_id, bytes, format, role, opts)
}

/// Writes instances back out in `format`, one line each. Ground truth and
/// submissions share the writer; confidences are emitted when
/// `opts.confidence` is set.
pub fn serialize(annotation: &ImageAnnotation, format: Format, opts: &ParseOptions) -> String {
    let mut out = String::new();
    for inst in &annotation.instances {
        let transcript = if inst.dont_care {
            opts.dontcare_token.as_str()
        } else {
            inst.transcript.as_str()
        };
        match format {
            Format::Icdar2013 => {
                let b = inst.polygon.bounds();
                let _ = write!(out, "{}, {}, {}, {}, ", b.min.x, b.min.y, b.max.x, b.max.y);
                if let (true, Some(c)) = (opts.confidence, inst.confidence) {
                    let _ = write!(out, "{c}, ");
                }
                out.push_str(&quote(transcript));
            }
            Format::Icdar2015 | Format::CharLevel => {
                for p in inst.polygon.vertices() {
                    let _ = write!(out, "{},{},", p.x, p.y);
                }
                if let (true, Some(c)) = (opts.confidence, inst.confidence) {
                    let _ = write!(out, "{c},");
                }
                out.push_str(transcript);
            }
        }
        out.push('\n');
    }
    out
}
