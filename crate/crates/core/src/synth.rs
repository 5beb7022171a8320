//! Synthetic face-like corpus with a controllable subpopulation attribute.
//!
//! Each image is a flat base tone with an oval face region, two eye regions
//! (bright ellipses when open, dark lines when closed) and additive Gaussian
//! noise. Base tone separates the two subpopulations; eye state carries the
//! label. Tone dominates PCA variance while the eye signal stays learnable.

use crate::ingest::SampleRecord;
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {detail}")]
    BadConfig { detail: String },
    #[error("subpopulation {tag:?} absent from the records")]
    MissingSubpopulation { tag: String },
    #[error("test fraction {frac} outside [0, 1]")]
    BadFraction { frac: f64 },
}

pub const SUBPOP_A: &str = "A";
pub const SUBPOP_B: &str = "B";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Images per (subpopulation x class) cell; total = 4 * n_per_cell.
    pub n_per_cell: usize,
    /// Mean base intensity of subpopulation A.
    pub tone_a: f64,
    /// Mean base intensity of subpopulation B.
    pub tone_b: f64,
    /// Stddev of per-image tone jitter.
    pub tone_jitter: f64,
    pub image_side: usize,
    /// Stddev of per-pixel additive Gaussian noise.
    pub noise_std: f64,
    /// Exponent of the brightness-dependent eye-contrast falloff
    /// (0 = flat additive amplitudes everywhere).
    pub contrast_falloff: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_cell: 200,
            tone_a: 0.75,
            tone_b: 0.35,
            tone_jitter: 0.03,
            image_side: 64,
            noise_std: 0.05,
            contrast_falloff: 2.0,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |detail: String| Err(SynthError::BadConfig { detail });
        if self.n_per_cell == 0 {
            return bad("n_per_cell must be >= 1".into());
        }
        if self.image_side < 16 {
            return bad(format!("image_side {} too small (need >= 16)", self.image_side));
        }
        for (name, v) in [("tone_a", self.tone_a), ("tone_b", self.tone_b)] {
            if !(0.05..=0.95).contains(&v) {
                return bad(format!("{name} {v} outside [0.05, 0.95]"));
            }
        }
        for (name, v) in [
            ("tone_jitter", self.tone_jitter),
            ("noise_std", self.noise_std),
        ] {
            if !(0.0..=0.5).contains(&v) {
                return bad(format!("{name} {v} outside [0, 0.5]"));
            }
        }
        if !(0.0..=8.0).contains(&self.contrast_falloff) {
            return bad(format!(
                "contrast_falloff {} outside [0, 8]",
                self.contrast_falloff
            ));
        }
        Ok(())
    }
}

/// Standard normal draw via Box-Muller on two uniform draws; two uniforms
/// are consumed per call so the stream stays aligned and reproducible.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn inside_ellipse(y: f64, x: f64, cy: f64, cx: f64, ry: f64, rx: f64) -> bool {
    let dy = (y - cy) / ry;
    let dx = (x - cx) / rx;
    dy * dy + dx * dx <= 1.0
}

/// Face value at the brighter subpopulation's nominal tone; the eye
/// amplitudes are defined at this brightness.
const REFERENCE_FACE: f64 = 0.85;

/// Draw one face: base tone, +0.1 oval face region, eye regions (open:
/// bright 3 px ellipses, closed: dark 1 px lines), then noise, clamped to
/// [0, 1]. The eye amplitudes are +0.25 / -0.2 at the reference face
/// brightness and fall off with local brightness
/// (amplitude * (face / 0.85)^contrast_falloff), the way underexposure
/// compresses contrast on darker faces.
fn render_face(
    side: usize,
    base: f64,
    open_eyes: bool,
    noise_std: f64,
    contrast_falloff: f64,
    rng: &mut ChaCha8Rng,
) -> Tensor {
    let mut img = Tensor::zeros(side, side, 1);
    let s = side as f64;
    let face_cy = s * 0.52;
    let face_cx = s * 0.5;
    let face_ry = s * 0.42;
    let face_rx = s * 0.32;
    let eye_y = s * 0.40;
    let eye_rx = s * 0.09;
    let eye_centers = [s * 0.35, s * 0.65];
    let face_value = base + 0.1;
    let scale = (face_value / REFERENCE_FACE).powf(contrast_falloff);
    for y in 0..side {
        for x in 0..side {
            let yf = y as f64;
            let xf = x as f64;
            let mut v = base;
            if inside_ellipse(yf, xf, face_cy, face_cx, face_ry, face_rx) {
                v += 0.1;
                if open_eyes {
                    // Bright open-eye ellipses, 3 px tall.
                    for &cx in &eye_centers {
                        if inside_ellipse(yf, xf, eye_y, cx, 1.5, eye_rx) {
                            v += 0.25 * scale;
                        }
                    }
                } else {
                    // Dark 1 px closed-eye lines.
                    for &cx in &eye_centers {
                        if yf == eye_y.round() && (xf - cx).abs() <= eye_rx {
                            v -= 0.2 * scale;
                        }
                    }
                }
            }
            img.set(y, x, 0, v);
        }
    }
    if noise_std > 0.0 {
        for v in img.data.iter_mut() {
            *v += noise_std * gaussian(rng);
        }
    }
    for v in img.data.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    img
}

/// Generate the corpus: for each subpopulation (A then B) and class (alert
/// then drowsy), `n_per_cell` images. Deterministic under the seed; records
/// carry the subpopulation tag in `split` and a stable relative file name.
pub fn generate(config: &SynthConfig) -> Result<(Vec<Tensor>, Vec<SampleRecord>), SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut images = Vec::with_capacity(4 * config.n_per_cell);
    let mut records = Vec::with_capacity(4 * config.n_per_cell);
    let cells = [
        (SUBPOP_A, config.tone_a, 0u8),
        (SUBPOP_A, config.tone_a, 1u8),
        (SUBPOP_B, config.tone_b, 0u8),
        (SUBPOP_B, config.tone_b, 1u8),
    ];
    let mut index = 0usize;
    for (tag, tone, label) in cells {
        for _ in 0..config.n_per_cell {
            let base = (tone + config.tone_jitter * gaussian(&mut rng)).clamp(0.05, 0.95);
            let open_eyes = label == 0;
            let img = render_face(
                config.image_side,
                base,
                open_eyes,
                config.noise_std,
                config.contrast_falloff,
                &mut rng,
            );
            images.push(img);
            records.push(SampleRecord {
                image_path: PathBuf::from(format!("img_{index:05}.png")),
                label,
                output: None,
                split: Some(tag.to_string()),
            });
            index += 1;
        }
    }
    Ok((images, records))
}

/// Partition for the biased-training experiment: the training set draws only
/// from `train_subpop` (minus a held-out share selected per class by a
/// seeded shuffle); the test set gets that held-out share plus the entire
/// other subpopulation. Returns index lists into `records`.
pub fn split_biased(
    records: &[SampleRecord],
    train_subpop: &str,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SynthError> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(SynthError::BadFraction { frac: test_fraction });
    }
    let in_subpop: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split.as_deref() == Some(train_subpop))
        .map(|(i, _)| i)
        .collect();
    if in_subpop.is_empty() {
        return Err(SynthError::MissingSubpopulation { tag: train_subpop.to_string() });
    }
    let others: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split.as_deref() != Some(train_subpop))
        .map(|(i, _)| i)
        .collect();
    if others.is_empty() {
        return Err(SynthError::MissingSubpopulation {
            tag: format!("any subpopulation other than {train_subpop}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for class in [0u8, 1u8] {
        let mut pool: Vec<usize> = in_subpop
            .iter()
            .copied()
            .filter(|&i| records[i].label == class)
            .collect();
        use rand::seq::SliceRandom;
        pool.shuffle(&mut rng);
        let k = ((pool.len() as f64) * test_fraction).round() as usize;
        held_out.extend_from_slice(&pool[..k]);
        train.extend_from_slice(&pool[k..]);
    }
    train.sort_unstable();
    let mut test = held_out;
    test.extend_from_slice(&others);
    test.sort_unstable();
    Ok((train, test))
}
