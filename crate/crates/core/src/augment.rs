//! Training-time augmentation: intensity rescale, centered shear + zoom with
//! bilinear sampling, and horizontal flips.

use crate::tensor::{sample_bilinear, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augment config: {detail}")]
    BadConfig { detail: String },
    #[error("zoom factor must be positive, got {zoom}")]
    DegenerateZoom { zoom: f64 },
    #[error("cannot augment an empty image")]
    EmptyImage,
}

/// Ranges the per-sample transform parameters are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Multiplicative intensity factor range.
    pub rescale: (f64, f64),
    /// Maximum shear angle in radians (drawn from [-max, max]).
    pub shear_max: f64,
    /// Zoom factor range (about the image center).
    pub zoom: (f64, f64),
    pub hflip_prob: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rescale: (0.8, 1.2),
            shear_max: 0.2,
            zoom: (0.9, 1.1),
            hflip_prob: 0.5,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |detail: String| Err(AugmentError::BadConfig { detail });
        if self.rescale.0 > self.rescale.1 {
            return bad(format!("rescale range [{}, {}] inverted", self.rescale.0, self.rescale.1));
        }
        if self.zoom.0 > self.zoom.1 {
            return bad(format!("zoom range [{}, {}] inverted", self.zoom.0, self.zoom.1));
        }
        if self.zoom.0 <= 0.0 {
            return Err(AugmentError::DegenerateZoom { zoom: self.zoom.0 });
        }
        if self.shear_max < 0.0 {
            return bad(format!("shear_max {} negative", self.shear_max));
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return bad(format!("hflip_prob {} outside [0, 1]", self.hflip_prob));
        }
        Ok(())
    }
}

/// One sampled transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub rescale: f64,
    pub shear: f64,
    pub zoom: f64,
    pub hflip: bool,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self { rescale: 1.0, shear: 0.0, zoom: 1.0, hflip: false }
    }
}

/// Draw parameters uniformly from the configured ranges. The draw order is
/// fixed (rescale, shear, zoom, flip) so a seeded generator replays exactly.
pub fn sample_params(config: &AugmentConfig, rng: &mut ChaCha8Rng) -> AugmentParams {
    let rescale = rng.gen_range(config.rescale.0..=config.rescale.1);
    let shear = rng.gen_range(-config.shear_max..=config.shear_max);
    let zoom = rng.gen_range(config.zoom.0..=config.zoom.1);
    let hflip = rng.gen::<f64>() < config.hflip_prob;
    AugmentParams { rescale, shear, zoom, hflip }
}

/// Apply, in order: intensity rescale, centered shear-then-zoom affine with
/// bilinear sampling and edge clamping, optional horizontal flip. The output
/// keeps the input shape with values clamped to [0, 1]; identity parameters
/// reproduce the input bit-exactly.
pub fn augment(image: &Tensor, params: &AugmentParams) -> Result<Tensor, AugmentError> {
    if image.is_empty() {
        return Err(AugmentError::EmptyImage);
    }
    if params.zoom <= 0.0 {
        return Err(AugmentError::DegenerateZoom { zoom: params.zoom });
    }

    let mut out = image.clone();
    if params.rescale != 1.0 {
        for v in out.data.iter_mut() {
            *v *= params.rescale;
        }
    }

    if params.shear != 0.0 || params.zoom != 1.0 {
        let src = out;
        out = Tensor::zeros(src.h, src.w, src.c);
        let cx = (src.w - 1) as f64 / 2.0;
        let cy = (src.h - 1) as f64 / 2.0;
        // Forward map: shear (x += shear * y) then zoom, both about the
        // center. Pixels are filled by the inverse map.
        for y in 0..src.h {
            let ry = y as f64 - cy;
            let sy = ry / params.zoom + cy;
            for x in 0..src.w {
                let rx = x as f64 - cx;
                let sx = (rx / params.zoom - params.shear * (ry / params.zoom)) + cx;
                for ch in 0..src.c {
                    out.set(y, x, ch, sample_bilinear(&src, sy, sx, ch));
                }
            }
        }
    }

    if params.hflip {
        let src = out.clone();
        for y in 0..src.h {
            for x in 0..src.w {
                for ch in 0..src.c {
                    out.set(y, x, ch, src.get(y, src.w - 1 - x, ch));
                }
            }
        }
    }

    for v in out.data.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gradient_image() -> Tensor {
        let mut t = Tensor::zeros(4, 4, 1);
        for y in 0..4 {
            for x in 0..4 {
                t.set(y, x, 0, (y * 4 + x) as f64 / 15.0);
            }
        }
        t
    }

    #[test]
    fn identity_params_reproduce_input_bit_exactly() {
        let img = gradient_image();
        let out = augment(&img, &AugmentParams::identity()).unwrap();
        assert_eq!(out.data, img.data);
    }

    #[test]
    fn double_flip_restores_original() {
        let img = gradient_image();
        let flip = AugmentParams { hflip: true, ..AugmentParams::identity() };
        let once = augment(&img, &flip).unwrap();
        let twice = augment(&once, &flip).unwrap();
        assert_eq!(twice.data, img.data);
    }

    #[test]
    fn zoom_two_moves_corner_marker_to_computed_position() {
        // Marker at (0,0); zoom 2 about center 1.5 pulls the sample point for
        // output (0,0) to source (0.75, 0.75), whose bilinear weight on the
        // marker is 0.25 * 0.25.
        let mut img = Tensor::zeros(4, 4, 1);
        img.set(0, 0, 0, 1.0);
        let params = AugmentParams { zoom: 2.0, ..AugmentParams::identity() };
        let out = augment(&img, &params).unwrap();
        assert!((out.get(0, 0, 0) - 0.0625).abs() <= 1e-12);
        assert!(out.get(3, 3, 0).abs() <= 1e-12);
        assert!(out.get(1, 1, 0).abs() <= 1e-12);
    }

    #[test]
    fn degenerate_zoom_rejected() {
        let img = gradient_image();
        let params = AugmentParams { zoom: 0.0, ..AugmentParams::identity() };
        assert!(matches!(
            augment(&img, &params),
            Err(AugmentError::DegenerateZoom { .. })
        ));
    }

    #[test]
    fn degenerate_ranges_always_sample_identity() {
        let config = AugmentConfig {
            rescale: (1.0, 1.0),
            shear_max: 0.0,
            zoom: (1.0, 1.0),
            hflip_prob: 0.0,
            rng_seed: 1,
        };
        config.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        for _ in 0..10 {
            let p = sample_params(&config, &mut rng);
            assert_eq!(p, AugmentParams::identity());
        }
    }

    #[test]
    fn same_seed_gives_same_parameter_sequence() {
        let config = AugmentConfig::default();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(sample_params(&config, &mut a), sample_params(&config, &mut b));
        }
    }

    #[test]
    fn flip_fraction_tracks_probability() {
        let config = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let flips = (0..n)
            .filter(|_| sample_params(&config, &mut rng).hflip)
            .count();
        let frac = flips as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "flip fraction {frac}");
    }

    #[test]
    fn flip_commutes_with_rescale() {
        let img = gradient_image();
        let flip = AugmentParams { hflip: true, ..AugmentParams::identity() };
        let scale = AugmentParams { rescale: 0.9, ..AugmentParams::identity() };
        let a = augment(&augment(&img, &flip).unwrap(), &scale).unwrap();
        let b = augment(&augment(&img, &scale).unwrap(), &flip).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn output_stays_in_unit_range_and_keeps_shape() {
        let img = gradient_image();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let config = AugmentConfig { rescale: (0.5, 2.0), ..AugmentConfig::default() };
        for _ in 0..100 {
            let p = sample_params(&config, &mut rng);
            let out = augment(&img, &p).unwrap();
            assert_eq!((out.h, out.w, out.c), (img.h, img.w, img.c));
            for v in &out.data {
                assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
