//! Character-level end-to-end OCR evaluation.
//!
//! `popeval` scores an OCR system by overlaying its predicted text boxes on
//! the annotated ones and removing characters that appear on both sides,
//! recursively, in reading order. Removed characters are true positives;
//! precision and recall fall out of the character totals. Because it works
//! on characters instead of whole boxes, split and merged detections still
//! earn credit, and the same corpus can be annotated per word or per
//! character.
//!
//! The crate also carries the box-level metrics the character-level score
//! is usually compared against (IoU matching, exact-match end-to-end, 1-NED,
//! average precision), a few corpus diagnostics, and a seeded scenario
//! generator whose expected values come from a separate reference
//! implementation.
//!
//! ```
//! use popeval::{evaluate_image, EvalConfig, Polygon, TextInstance};
//!
//! let gt = vec![TextInstance::new(Polygon::rect(0.0, 0.0, 70.0, 20.0)?, "POPEVAL")];
//! let dets = vec![
//!     TextInstance::new(Polygon::rect(10.0, 0.0, 30.0, 20.0)?, "OP"),
//!     TextInstance::new(Polygon::rect(30.0, 0.0, 70.0, 20.0)?, "EVAL"),
//! ];
//! let result = evaluate_image(&gt, &dets, &EvalConfig::default());
//! assert_eq!(result.removed_weight, 6.0);
//! assert_eq!(result.precision, 1.0);
//! assert!((result.recall - 6.0 / 7.0).abs() < 1e-12);
//! # Ok::<(), popeval::GeometryError>(())
//! ```

pub mod analysis;
pub mod annotation;
pub mod baseline;
pub mod evaluate;
pub mod geometry;
pub mod score;
pub mod synth;

pub use annotation::{ImageAnnotation, NormalizeOptions, TextInstance};
pub use evaluate::{evaluate_image, EvalConfig, ImageEvalResult};
pub use geometry::{GeometryError, Point, Polygon};
pub use score::ScoreTriple;

// Compiles and runs the code blocks of the guide under `cargo test`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/popeval.md")]
    mod popeval {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/synth.md")]
    mod synth {}
}
