//! Image tensors: h x w x c arrays of 64-bit floats, interleaved row-major.
//!
//! The same container carries decoded images (values in [0, 1]) and network
//! feature maps (unbounded values).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("tensor data length {len} does not match {h}x{w}x{c}")]
    BadShape { h: usize, w: usize, c: usize, len: usize },
    #[error("tensor dimensions must be nonzero (got {h}x{w}x{c})")]
    Empty { h: usize, w: usize, c: usize },
    #[error("channel count {c} unsupported (expected 1 or 3)")]
    BadChannels { c: usize },
}

/// h x w x c tensor, data laid out `(y * w + x) * c + ch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if h == 0 || w == 0 || c == 0 {
            return Err(TensorError::Empty { h, w, c });
        }
        if data.len() != h * w * c {
            return Err(TensorError::BadShape { h, w, c, len: data.len() });
        }
        Ok(Self { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        assert!(h > 0 && w > 0 && c > 0, "zero-sized tensor");
        Self { h, w, c, data: vec![0.0; h * w * c] }
    }

    /// Flat vector view, shape 1 x 1 x len.
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty());
        Self { h: 1, w: 1, c: data.len(), data }
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: f64) {
        self.data[(y * self.w + x) * self.c + ch] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Luminance-weighted grayscale (0.299 R + 0.587 G + 0.114 B).
    /// Single-channel inputs are returned as a copy.
    pub fn to_grayscale(&self) -> Result<Tensor, TensorError> {
        match self.c {
            1 => Ok(self.clone()),
            3 => {
                let mut out = Tensor::zeros(self.h, self.w, 1);
                for y in 0..self.h {
                    for x in 0..self.w {
                        let r = self.get(y, x, 0);
                        let g = self.get(y, x, 1);
                        let b = self.get(y, x, 2);
                        out.set(y, x, 0, 0.299 * r + 0.587 * g + 0.114 * b);
                    }
                }
                Ok(out)
            }
            c => Err(TensorError::BadChannels { c }),
        }
    }

    /// Gray -> RGB by channel replication; RGB passes through.
    pub fn to_rgb(&self) -> Result<Tensor, TensorError> {
        match self.c {
            3 => Ok(self.clone()),
            1 => {
                let mut out = Tensor::zeros(self.h, self.w, 3);
                for y in 0..self.h {
                    for x in 0..self.w {
                        let v = self.get(y, x, 0);
                        for ch in 0..3 {
                            out.set(y, x, ch, v);
                        }
                    }
                }
                Ok(out)
            }
            c => Err(TensorError::BadChannels { c }),
        }
    }
}

/// Bilinear resize with half-pixel centers and edge clamping.
///
/// When the target equals the source size the input is copied bit-exactly.
pub fn resize_bilinear(src: &Tensor, target_h: usize, target_w: usize) -> Result<Tensor, TensorError> {
    if target_h == 0 || target_w == 0 {
        return Err(TensorError::Empty { h: target_h, w: target_w, c: src.c });
    }
    if target_h == src.h && target_w == src.w {
        return Ok(src.clone());
    }
    let mut out = Tensor::zeros(target_h, target_w, src.c);
    let scale_y = src.h as f64 / target_h as f64;
    let scale_x = src.w as f64 / target_w as f64;
    for oy in 0..target_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(src.h - 1);
        let y1 = (y0 + 1).min(src.h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..target_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(src.w - 1);
            let x1 = (x0 + 1).min(src.w - 1);
            let fx = sx - x0 as f64;
            for ch in 0..src.c {
                let tl = src.get(y0, x0, ch);
                let tr = src.get(y0, x1, ch);
                let bl = src.get(y1, x0, ch);
                let br = src.get(y1, x1, ch);
                let top = tl + (tr - tl) * fx;
                let bot = bl + (br - bl) * fx;
                out.set(oy, ox, ch, top + (bot - top) * fy);
            }
        }
    }
    Ok(out)
}

/// Bilinear sample at fractional coordinates with edge clamping.
pub fn sample_bilinear(src: &Tensor, y: f64, x: f64, ch: usize) -> f64 {
    let yc = y.clamp(0.0, (src.h - 1) as f64);
    let xc = x.clamp(0.0, (src.w - 1) as f64);
    let y0 = yc.floor() as usize;
    let x0 = xc.floor() as usize;
    let y1 = (y0 + 1).min(src.h - 1);
    let x1 = (x0 + 1).min(src.w - 1);
    let fy = yc - y0 as f64;
    let fx = xc - x0 as f64;
    let tl = src.get(y0, x0, ch);
    let tr = src.get(y0, x1, ch);
    let bl = src.get(y1, x0, ch);
    let br = src.get(y1, x1, ch);
    let top = tl + (tr - tl) * fx;
    let bot = bl + (br - bl) * fx;
    top + (bot - top) * fy
}
