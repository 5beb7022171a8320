//! Corpus loading: manifests binding image files to labels and optional
//! precomputed model outputs, plus image decoding and the PCA stacking step.
//!
//! Manifest format: UTF-8 text, comma separated, header
//! `path,label[,output][,split]`, `#` lines ignored, paths resolved relative
//! to the manifest's directory.

use crate::numerics::Matrix;
use crate::tensor::{resize_bilinear, Tensor, TensorError};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest {path} line {line}: {detail}")]
    Manifest { path: String, line: usize, detail: String },
    #[error("{path}: unsupported magic bytes (want PNG, P5 or P6)")]
    UnsupportedFormat { path: String },
    #[error("{path}: truncated or malformed image: {detail}")]
    BadImage { path: String, detail: String },
    #[error("target dimensions must be nonzero (got {h}x{w})")]
    ZeroTarget { h: usize, w: usize },
    #[error("no images to stack")]
    EmptyStack,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One manifest row: an image path with its binary label (0 = alert,
/// 1 = drowsy), an optional model output and an optional split tag.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub image_path: PathBuf,
    pub label: u8,
    pub output: Option<f64>,
    pub split: Option<String>,
}

/// Parsed manifest; `duplicate_warnings` counts rows whose path already
/// appeared earlier.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub duplicate_warnings: usize,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, path)
}

fn manifest_err(path: &Path, line: usize, detail: impl Into<String>) -> IngestError {
    IngestError::Manifest {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, IngestError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut duplicate_warnings = 0usize;
    let mut header: Option<(bool, bool)> = None; // (has_output, has_split)

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match header {
            None => {
                if fields.len() < 2 || fields[0] != "path" || fields[1] != "label" {
                    return Err(manifest_err(
                        path,
                        line_no,
                        format!("header must start with `path,label`, got {line:?}"),
                    ));
                }
                let has_output = fields.get(2) == Some(&"output");
                let has_split = fields.last() == Some(&"split") && fields.len() > 2;
                let expected: Vec<&str> = match (has_output, has_split) {
                    (true, true) => vec!["path", "label", "output", "split"],
                    (true, false) => vec!["path", "label", "output"],
                    (false, true) => vec!["path", "label", "split"],
                    (false, false) => vec!["path", "label"],
                };
                if fields != expected {
                    return Err(manifest_err(
                        path,
                        line_no,
                        format!("unrecognized header columns {fields:?}"),
                    ));
                }
                header = Some((has_output, has_split));
            }
            Some((has_output, has_split)) => {
                let mut expected_len = 2;
                if has_output {
                    expected_len += 1;
                }
                if has_split {
                    expected_len += 1;
                }
                if fields.len() != expected_len {
                    return Err(manifest_err(
                        path,
                        line_no,
                        format!("expected {expected_len} fields, found {}", fields.len()),
                    ));
                }
                let rel = fields[0];
                if rel.is_empty() {
                    return Err(manifest_err(path, line_no, "empty path"));
                }
                let label: u8 = fields[1].parse().map_err(|_| {
                    manifest_err(path, line_no, format!("label {:?} is not an integer", fields[1]))
                })?;
                if label > 1 {
                    return Err(manifest_err(
                        path,
                        line_no,
                        format!("label {label} outside {{0, 1}}"),
                    ));
                }
                let mut idx = 2;
                let output = if has_output {
                    let raw = fields[idx];
                    idx += 1;
                    if raw.is_empty() {
                        None
                    } else {
                        let o: f64 = raw.parse().map_err(|_| {
                            manifest_err(path, line_no, format!("output {raw:?} is not a number"))
                        })?;
                        if !(0.0..=1.0).contains(&o) {
                            return Err(manifest_err(
                                path,
                                line_no,
                                format!("output {o} outside [0, 1]"),
                            ));
                        }
                        Some(o)
                    }
                } else {
                    None
                };
                let split = if has_split {
                    let raw = fields[idx];
                    if raw.is_empty() { None } else { Some(raw.to_string()) }
                } else {
                    None
                };
                if !seen.insert(rel.to_string()) {
                    duplicate_warnings += 1;
                }
                records.push(SampleRecord {
                    image_path: base.join(rel),
                    label,
                    output,
                    split,
                });
            }
        }
    }
    if header.is_none() {
        return Err(manifest_err(path, 0, "missing header"));
    }
    Ok(Manifest { records, duplicate_warnings })
}

/// Decode an image (PNG, binary PPM/PGM), optionally convert to grayscale by
/// luminance, bilinear-resize to the target, intensities mapped to [0, 1].
pub fn load_image(
    path: &Path,
    target_h: usize,
    target_w: usize,
    grayscale: bool,
) -> Result<Tensor, IngestError> {
    if target_h == 0 || target_w == 0 {
        return Err(IngestError::ZeroTarget { h: target_h, w: target_w });
    }
    let decoded = load_image_native(path, grayscale)?;
    Ok(resize_bilinear(&decoded, target_h, target_w)?)
}

/// Decode at native resolution, without resizing.
pub fn load_image_native(path: &Path, grayscale: bool) -> Result<Tensor, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let decoded = decode_image(&bytes, path)?;
    if grayscale {
        Ok(decoded.to_grayscale()?)
    } else {
        Ok(decoded)
    }
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Decode by magic bytes without consulting the file extension.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<Tensor, IngestError> {
    if bytes.starts_with(&PNG_MAGIC) {
        decode_png(bytes, path)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes, path)
    } else {
        Err(IngestError::UnsupportedFormat { path: path.display().to_string() })
    }
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Tensor, IngestError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| {
        IngestError::BadImage { path: path.display().to_string(), detail: e.to_string() }
    })?;
    let tensor = match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = gray.dimensions();
            let data = gray.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Tensor::new(h as usize, w as usize, 1, data)?
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            let data = rgb.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
            Tensor::new(h as usize, w as usize, 3, data)?
        }
    };
    Ok(tensor)
}

/// Binary PPM (P6) and PGM (P5) with maxval <= 255.
fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Tensor, IngestError> {
    let bad = |detail: &str| IngestError::BadImage {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => unreachable!("checked by caller"),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        // Skip whitespace and `#` comment lines between header fields.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("missing header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?;
        *f = text.parse().map_err(|_| bad("bad header number"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be within 1..=255"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing payload separator"));
    }
    pos += 1;
    let need = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(bad(&format!(
            "truncated payload: need {need} bytes, have {}",
            payload.len()
        )));
    }
    let data = payload[..need]
        .iter()
        .map(|&v| v as f64 / maxval as f64)
        .collect();
    Ok(Tensor::new(height, width, channels, data)?)
}

/// Stack images for PCA: grayscale, resize to side x side, flatten each
/// image row-major into one row of an N x side^2 matrix.
pub fn stack_for_pca(images: &[Tensor], side: usize) -> Result<Matrix, IngestError> {
    if images.is_empty() {
        return Err(IngestError::EmptyStack);
    }
    if side == 0 {
        return Err(IngestError::ZeroTarget { h: side, w: side });
    }
    let p = side * side;
    let mut data = Vec::with_capacity(images.len() * p);
    for img in images {
        let gray = img.to_grayscale()?;
        let resized = resize_bilinear(&gray, side, side)?;
        data.extend_from_slice(&resized.data);
    }
    Ok(Matrix::new(images.len(), p, data).expect("stacked rows are finite and sized"))
}
