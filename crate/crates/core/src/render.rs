//! Visual outputs: the PCA-sorted montage with a correctness colormap and
//! per-image saliency overlays, plus PNG and binary PPM/PGM writers.

use crate::gridlayout::GridLayout;
use crate::tensor::{resize_bilinear, Tensor, TensorError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("colormap anchors invalid: {detail}")]
    BadAnchors { detail: String },
    #[error("no image available for assigned cell ({row}, {col}) -> sample {index}")]
    MissingImage { row: usize, col: usize, index: usize },
    #[error("saliency map {sal_h}x{sal_w} does not match image {img_h}x{img_w}")]
    SizeMismatch { sal_h: usize, sal_w: usize, img_h: usize, img_w: usize },
    #[error("alpha {alpha} outside [0, 1]")]
    BadAlpha { alpha: f64 },
    #[error("tile size must be nonzero")]
    ZeroTile,
    #[error("cannot write zero-dimension image")]
    EmptyImage,
    #[error("cannot encode {channels}-channel image")]
    BadChannels { channels: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Piecewise-linear colormap over anchor colors at increasing positions.
#[derive(Debug, Clone)]
pub struct Colormap {
    anchors: Vec<(f64, [u8; 3])>,
}

impl Colormap {
    pub fn new(anchors: Vec<(f64, [u8; 3])>) -> Result<Self, RenderError> {
        if anchors.len() < 2 {
            return Err(RenderError::BadAnchors { detail: "need at least two anchors".into() });
        }
        if anchors.first().map(|a| a.0) != Some(0.0) || anchors.last().map(|a| a.0) != Some(1.0) {
            return Err(RenderError::BadAnchors {
                detail: "anchors must start at 0 and end at 1".into(),
            });
        }
        if anchors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(RenderError::BadAnchors {
                detail: "anchor positions must strictly increase".into(),
            });
        }
        Ok(Self { anchors })
    }

    /// Five-point purple-to-yellow palette for the montage overlay
    /// (low = failure = purple, mid = green, high = well-performing = yellow).
    pub fn overlay_default() -> Self {
        Self::new(vec![
            (0.0, [68, 1, 84]),
            (0.25, [59, 82, 139]),
            (0.5, [33, 145, 140]),
            (0.75, [94, 201, 98]),
            (1.0, [253, 231, 37]),
        ])
        .expect("static anchors are valid")
    }

    /// Blue-to-green-to-red palette for saliency (red = significant).
    pub fn saliency_default() -> Self {
        Self::new(vec![
            (0.0, [0, 0, 255]),
            (0.5, [0, 255, 0]),
            (1.0, [255, 0, 0]),
        ])
        .expect("static anchors are valid")
    }

    /// Linear interpolation between the bracketing anchors, per channel,
    /// rounded to the nearest integer; out-of-range values are clamped.
    pub fn lookup(&self, v: f64) -> [u8; 3] {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        let mut lo = self.anchors[0];
        for &hi in &self.anchors[1..] {
            if v <= hi.0 {
                let span = hi.0 - lo.0;
                let t = (v - lo.0) / span;
                let mut rgb = [0u8; 3];
                for ch in 0..3 {
                    let a = lo.1[ch] as f64;
                    let b = hi.1[ch] as f64;
                    rgb[ch] = (a + (b - a) * t).round() as u8;
                }
                return rgb;
            }
            lo = hi;
        }
        self.anchors.last().unwrap().1
    }
}

fn check_alpha(alpha: f64) -> Result<(), RenderError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RenderError::BadAlpha { alpha });
    }
    Ok(())
}

/// Compose the grid montage: each assigned cell shows its image resized to
/// `tile_px`, tinted by the colormap at the cell's correctness 1 - error
/// (alpha * color + (1 - alpha) * pixel). Empty cells stay black.
pub fn montage(
    layout: &GridLayout,
    images: &[Tensor],
    tile_px: usize,
    alpha: f64,
    map: &Colormap,
) -> Result<Tensor, RenderError> {
    check_alpha(alpha)?;
    if tile_px == 0 {
        return Err(RenderError::ZeroTile);
    }
    let rows = layout.spec.rows;
    let cols = layout.spec.cols;
    let mut out = Tensor::zeros(rows * tile_px, cols * tile_px, 3);
    for row in 0..rows {
        for col in 0..cols {
            let Some(index) = layout.assigned(row, col) else { continue };
            let image = images
                .get(index)
                .ok_or(RenderError::MissingImage { row, col, index })?;
            let tile = resize_bilinear(&image.to_rgb()?, tile_px, tile_px)?;
            let tint = layout
                .overlay_at(row, col)
                .map(|err| map.lookup(1.0 - err));
            for ty in 0..tile_px {
                for tx in 0..tile_px {
                    for ch in 0..3 {
                        let pixel = tile.get(ty, tx, ch);
                        let v = match tint {
                            Some(rgb) => {
                                alpha * (rgb[ch] as f64 / 255.0) + (1.0 - alpha) * pixel
                            }
                            None => pixel,
                        };
                        out.set(row * tile_px + ty, col * tile_px + tx, ch, v);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Blend a saliency colormap over the grayscale rendering of an image.
pub fn saliency_overlay(
    image: &Tensor,
    saliency: &Tensor,
    alpha: f64,
    map: &Colormap,
) -> Result<Tensor, RenderError> {
    check_alpha(alpha)?;
    if saliency.h != image.h || saliency.w != image.w {
        return Err(RenderError::SizeMismatch {
            sal_h: saliency.h,
            sal_w: saliency.w,
            img_h: image.h,
            img_w: image.w,
        });
    }
    let gray = image.to_grayscale()?;
    let mut out = Tensor::zeros(image.h, image.w, 3);
    for y in 0..image.h {
        for x in 0..image.w {
            let rgb = map.lookup(saliency.get(y, x, 0));
            let base = gray.get(y, x, 0);
            for ch in 0..3 {
                let v = alpha * (rgb[ch] as f64 / 255.0) + (1.0 - alpha) * base;
                out.set(y, x, ch, v);
            }
        }
    }
    Ok(out)
}

fn quantize(image: &Tensor) -> Result<Vec<u8>, RenderError> {
    if image.h == 0 || image.w == 0 {
        return Err(RenderError::EmptyImage);
    }
    Ok(image
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect())
}

/// Binary PPM (P6) for 3-channel input, PGM (P5) for single-channel.
/// Layout is exactly: magic, newline, width, space, height, newline,
/// 255, newline, raw payload.
pub fn write_ppm(image: &Tensor, path: &Path) -> Result<(), RenderError> {
    let payload = quantize(image)?;
    let magic = match image.c {
        1 => "P5",
        3 => "P6",
        c => return Err(RenderError::BadChannels { channels: c }),
    };
    let mut bytes = format!("{magic}\n{} {}\n255\n", image.w, image.h).into_bytes();
    bytes.extend_from_slice(&payload);
    std::fs::write(path, bytes).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// 8-bit non-interlaced PNG, grayscale or RGB by channel count.
pub fn write_png(image: &Tensor, path: &Path) -> Result<(), RenderError> {
    let payload = quantize(image)?;
    let color = match image.c {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(RenderError::BadChannels { channels: c }),
    };
    image::save_buffer_with_format(
        path,
        &payload,
        image.w as u32,
        image.h as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| RenderError::Png(e.to_string()))
}

/// In-memory PNG encoding, used where callers need the bytes.
pub fn encode_png(image: &Tensor) -> Result<Vec<u8>, RenderError> {
    let payload = quantize(image)?;
    let color = match image.c {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(RenderError::BadChannels { channels: c }),
    };
    let mut bytes = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(std::io::Cursor::new(&mut bytes));
    image::ImageEncoder::write_image(encoder, &payload, image.w as u32, image.h as u32, color)
        .map_err(|e| RenderError::Png(e.to_string()))?;
    Ok(bytes)
}
