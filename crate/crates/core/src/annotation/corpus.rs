//! Loading per-image files from directories and joining ground truth with
//! submissions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::parse::{parse_detections, parse_gt, Format, ParseError, ParseOptions};
use super::ImageAnnotation;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{dir}: image id {image_id:?} appears in more than one file")]
    DuplicateImage { dir: PathBuf, image_id: String },
    #[error("detections without ground truth for image(s): {}", .0.join(", "))]
    OrphanDetections(Vec<String>),
    #[error("{path}:{line}: malformed manifest line")]
    Manifest { path: PathBuf, line: usize },
}

/// Ground truth and detections for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub image_id: String,
    pub gt: ImageAnnotation,
    pub det: ImageAnnotation,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedPairs {
    /// Sorted by image id.
    pub pairs: Vec<ImagePair>,
    pub warnings: Vec<String>,
}

/// Derives the image id from a file name: the stem with a leading `gt_` or
/// `res_` removed, so `gt_img_12.txt` and `res_img_12.txt` both map to
/// `img_12`.
pub fn image_id_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for prefix in ["gt_", "res_"] {
        if let Some(rest) = stem.strip_prefix(prefix) {
            if !rest.is_empty() {
                return rest.to_owned();
            }
        }
    }
    stem
}

fn read(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.to_owned(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn parse_file(
    path: &Path,
    image_id: &str,
    format: Format,
    detections: bool,
    opts: &ParseOptions,
) -> Result<ImageAnnotation, CorpusError> {
    let bytes = read(path)?;
    let parsed = if detections {
        parse_detections(image_id, &bytes, format, opts)
    } else {
        parse_gt(image_id, &bytes, format, opts)
    };
    parsed.map_err(|source| CorpusError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Parses every `*.txt` file of `dir`, keyed by image id. Files are parsed
/// in parallel; the result does not depend on scheduling.
pub fn load_dir(
    dir: &Path,
    format: Format,
    detections: bool,
    opts: &ParseOptions,
) -> Result<BTreeMap<String, ImageAnnotation>, CorpusError> {
    let files = list_files(dir)?;
    let parsed: Vec<ImageAnnotation> = files
        .par_iter()
        .map(|path| parse_file(path, &image_id_from_path(path), format, detections, opts))
        .collect::<Result<_, _>>()?;
    let mut out = BTreeMap::new();
    for annotation in parsed {
        let id = annotation.image_id.clone();
        if out.insert(id.clone(), annotation).is_some() {
            return Err(CorpusError::DuplicateImage {
                dir: dir.to_owned(),
                image_id: id,
            });
        }
    }
    Ok(out)
}

/// Reads a manifest of `image_id,gt_file,det_file` lines. Relative paths are
/// resolved against the ground-truth and detection directories. An empty
/// `det_file` means the image has no detections.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, PathBuf, Option<PathBuf>)>, CorpusError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim().trim_start_matches('\u{feff}');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 || parts[0].is_empty() || parts[1].is_empty() {
            return Err(CorpusError::Manifest {
                path: path.to_owned(),
                line: i + 1,
            });
        }
        let det = (!parts[2].is_empty()).then(|| PathBuf::from(parts[2]));
        rows.push((parts[0].to_owned(), PathBuf::from(parts[1]), det));
    }
    Ok(rows)
}

/// Loads ground truth and detections and joins them on image id.
///
/// Detection files without ground truth are an error. Ground truth without
/// detections is evaluated against an empty submission and reported as a
/// warning. With a manifest, only the listed pairs are loaded.
pub fn load_pairs(
    gt_dir: &Path,
    det_dir: &Path,
    gt_format: Format,
    det_format: Format,
    opts: &ParseOptions,
    manifest: Option<&Path>,
) -> Result<LoadedPairs, CorpusError> {
    if let Some(manifest) = manifest {
        return load_from_manifest(gt_dir, det_dir, gt_format, det_format, opts, manifest);
    }
    // Both directories must exist even when one of them is empty.
    let gts = load_dir(gt_dir, gt_format, false, opts)?;
    let mut dets = load_dir(det_dir, det_format, true, opts)?;

    let orphans: Vec<String> = dets.keys().filter(|k| !gts.contains_key(*k)).cloned().collect();
    if !orphans.is_empty() {
        return Err(CorpusError::OrphanDetections(orphans));
    }
    let mut out = LoadedPairs::default();
    for (image_id, gt) in gts {
        let det = match dets.remove(&image_id) {
            Some(det) => det,
            None => {
                out.warnings
                    .push(format!("no detection file for image {image_id}; treating it as empty"));
                ImageAnnotation {
                    image_id: image_id.clone(),
                    instances: Vec::new(),
                }
            }
        };
        out.pairs.push(ImagePair { image_id, gt, det });
    }
    Ok(out)
}

fn load_from_manifest(
    gt_dir: &Path,
    det_dir: &Path,
    gt_format: Format,
    det_format: Format,
    opts: &ParseOptions,
    manifest: &Path,
) -> Result<LoadedPairs, CorpusError> {
    let rows = read_manifest(manifest)?;
    let mut seen = BTreeMap::new();
    for (id, _, _) in &rows {
        if seen.insert(id.clone(), ()).is_some() {
            return Err(CorpusError::DuplicateImage {
                dir: manifest.to_owned(),
                image_id: id.clone(),
            });
        }
    }
    let loaded: Vec<(ImagePair, Option<String>)> = rows
        .par_iter()
        .map(|(id, gt_file, det_file)| {
            let gt = parse_file(&gt_dir.join(gt_file), id, gt_format, false, opts)?;
            let (det, warning) = match det_file {
                Some(f) => (parse_file(&det_dir.join(f), id, det_format, true, opts)?, None),
                None => (
                    ImageAnnotation {
                        image_id: id.clone(),
                        instances: Vec::new(),
                    },
                    Some(format!("no detection file for image {id}; treating it as empty")),
                ),
            };
            Ok((
                ImagePair {
                    image_id: id.clone(),
                    gt,
                    det,
                },
                warning,
            ))
        })
        .collect::<Result<_, CorpusError>>()?;
    let mut out = LoadedPairs::default();
    for (pair, warning) in loaded {
        out.warnings.extend(warning);
        out.pairs.push(pair);
    }
    out.pairs.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_ids() {
        assert_eq!(image_id_from_path(Path::new("a/gt_img_12.txt")), "img_12");
        assert_eq!(image_id_from_path(Path::new("res_img_12.txt")), "img_12");
        assert_eq!(image_id_from_path(Path::new("img_3.txt")), "img_3");
        assert_eq!(image_id_from_path(Path::new("gt_.txt")), "gt_");
    }

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn joins_on_image_id() {
        let gt = tempfile::tempdir().unwrap();
        let det = tempfile::tempdir().unwrap();
        write(gt.path(), "gt_img_1.txt", "0,0,10,0,10,10,0,10,A\n");
        write(gt.path(), "gt_img_2.txt", "0,0,10,0,10,10,0,10,B\n");
        write(det.path(), "res_img_1.txt", "0,0,10,0,10,10,0,10,A\n");
        let opts = ParseOptions::default();
        let loaded = load_pairs(gt.path(), det.path(), Format::Icdar2015, Format::Icdar2015, &opts, None).unwrap();
        assert_eq!(loaded.pairs.len(), 2);
        assert_eq!(loaded.pairs[1].image_id, "img_2");
        assert!(loaded.pairs[1].det.instances.is_empty());
        assert_eq!(loaded.warnings.len(), 1);

        write(det.path(), "res_img_9.txt", "0,0,10,0,10,10,0,10,Z\n");
        let err = load_pairs(gt.path(), det.path(), Format::Icdar2015, Format::Icdar2015, &opts, None).unwrap_err();
        assert!(matches!(err, CorpusError::OrphanDetections(ids) if ids == vec!["img_9".to_string()]));
    }

    #[test]
    fn parse_errors_carry_the_path() {
        let gt = tempfile::tempdir().unwrap();
        let det = tempfile::tempdir().unwrap();
        write(gt.path(), "gt_img_1.txt", "0,0,10,0,10,x,0,10,A\n");
        let err = load_pairs(
            gt.path(),
            det.path(),
            Format::Icdar2015,
            Format::Icdar2015,
            &ParseOptions::default(),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("gt_img_1.txt"));
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn manifest_overrides_naming() {
        let gt = tempfile::tempdir().unwrap();
        let det = tempfile::tempdir().unwrap();
        write(gt.path(), "scene.txt", "0,0,10,0,10,10,0,10,A\n");
        write(det.path(), "output.txt", "0,0,10,0,10,10,0,10,A\n");
        let manifest = gt.path().join("pairs.csv");
        fs::write(&manifest, "# id,gt,det\nsceneA,scene.txt,output.txt\n").unwrap();
        let loaded = load_pairs(
            gt.path(),
            det.path(),
            Format::Icdar2015,
            Format::Icdar2015,
            &ParseOptions::default(),
            Some(&manifest),
        )
        .unwrap();
        assert_eq!(loaded.pairs.len(), 1);
        assert_eq!(loaded.pairs[0].image_id, "sceneA");
        assert_eq!(loaded.pairs[0].det.instances.len(), 1);
    }
}
