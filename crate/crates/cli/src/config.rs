//! Run configuration: defaults, the sectioned `key = value` config file,
//! and the effective-config echo that goes into every report.

use biaslens_core::augment::AugmentConfig;
use biaslens_core::nn::TrainConfig;
use biaslens_core::synth::SynthConfig;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path} line {line}: {detail}")]
    Syntax { path: String, line: usize, detail: String },
    #[error("config field {field}: {detail}")]
    BadValue { field: String, detail: String },
}

/// Everything a command needs, merged from defaults, the config file and
/// command-line flags (flags win).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Master seed; feeds synthesis, weight init, shuffling, dropout and
    /// augmentation streams.
    pub seed: u64,
    pub synth: SynthConfig,
    /// Subpopulation tag the biased training split draws from.
    pub train_subpop: String,
    /// Share of the training subpopulation held out for testing.
    pub test_fraction: f64,
    /// Side of the square grayscale images stacked for PCA.
    pub pca_side: usize,
    /// Grid dimensions; 0 means floor(sqrt(N)) at audit time.
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub train: TrainConfig,
    /// Square side training/prediction images are resized to.
    pub train_image_side: usize,
    /// Load training/prediction images as grayscale instead of RGB.
    pub train_grayscale: bool,
    pub augment_enabled: bool,
    pub augment: AugmentConfig,
    /// Blend strength for montage and saliency overlays.
    pub render_alpha: f64,
    /// Square tile side in the montage, pixels.
    pub render_tile: usize,
    /// Round model outputs to 0/1 before the overlay (off: probabilities).
    pub hard_outputs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            train_subpop: "A".to_string(),
            test_fraction: 0.25,
            pca_side: 32,
            grid_rows: 0,
            grid_cols: 0,
            train: TrainConfig::default(),
            train_image_side: 150,
            train_grayscale: false,
            augment_enabled: true,
            augment: AugmentConfig::default(),
            render_alpha: 0.45,
            render_tile: 24,
            hard_outputs: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    /// Parse sectioned `key = value` lines over the current values.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let err = |line: usize, detail: String| ConfigError::Syntax {
            path: path.display().to_string(),
            line,
            detail,
        };
        let mut section = String::from("run");
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, format!("unterminated section {line:?}")))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            self.apply_field(&section, key, value)
                .map_err(|detail| err(line_no, detail))?;
        }
        // Per-module seeds follow the master seed unless set explicitly later.
        self.propagate_seed();
        Ok(())
    }

    pub fn propagate_seed(&mut self) {
        self.synth.rng_seed = self.seed;
        self.train.rng_seed = self.seed;
        self.augment.rng_seed = self.seed;
    }

    fn apply_field(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse::<T>()
                .map_err(|_| format!("field {key}: cannot parse {value:?}"))
        }
        fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(format!("field {key}: expected true/false, got {other:?}")),
            }
        }
        match (section, key) {
            ("run", "seed") => self.seed = parse(key, value)?,
            ("synth", "n_per_cell") => self.synth.n_per_cell = parse(key, value)?,
            ("synth", "tone_a") => self.synth.tone_a = parse(key, value)?,
            ("synth", "tone_b") => self.synth.tone_b = parse(key, value)?,
            ("synth", "tone_jitter") => self.synth.tone_jitter = parse(key, value)?,
            ("synth", "image_side") => self.synth.image_side = parse(key, value)?,
            ("synth", "noise_std") => self.synth.noise_std = parse(key, value)?,
            ("synth", "contrast_falloff") => self.synth.contrast_falloff = parse(key, value)?,
            ("synth", "train_subpop") => self.train_subpop = value.to_string(),
            ("synth", "test_fraction") => self.test_fraction = parse(key, value)?,
            ("pca", "side") => self.pca_side = parse(key, value)?,
            ("grid", "rows") => self.grid_rows = parse(key, value)?,
            ("grid", "cols") => self.grid_cols = parse(key, value)?,
            ("train", "learning_rate") => self.train.learning_rate = parse(key, value)?,
            ("train", "beta1") => self.train.beta1 = parse(key, value)?,
            ("train", "beta2") => self.train.beta2 = parse(key, value)?,
            ("train", "epsilon") => self.train.epsilon_adam = parse(key, value)?,
            ("train", "batch_size") => self.train.batch_size = parse(key, value)?,
            ("train", "epochs") => self.train.epochs = parse(key, value)?,
            ("train", "image_side") => self.train_image_side = parse(key, value)?,
            ("train", "grayscale") => self.train_grayscale = parse_bool(key, value)?,
            ("augment", "enabled") => self.augment_enabled = parse_bool(key, value)?,
            ("augment", "rescale_lo") => self.augment.rescale.0 = parse(key, value)?,
            ("augment", "rescale_hi") => self.augment.rescale.1 = parse(key, value)?,
            ("augment", "shear_max") => self.augment.shear_max = parse(key, value)?,
            ("augment", "zoom_lo") => self.augment.zoom.0 = parse(key, value)?,
            ("augment", "zoom_hi") => self.augment.zoom.1 = parse(key, value)?,
            ("augment", "hflip_prob") => self.augment.hflip_prob = parse(key, value)?,
            ("render", "alpha") => self.render_alpha = parse(key, value)?,
            ("render", "tile") => self.render_tile = parse(key, value)?,
            ("audit", "hard_outputs") => self.hard_outputs = parse_bool(key, value)?,
            _ => return Err(format!("unknown field [{section}] {key}")),
        }
        Ok(())
    }

    /// Validate every field against its module's preconditions before any
    /// work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |field: &str, detail: String| ConfigError::BadValue {
            field: field.to_string(),
            detail,
        };
        self.synth
            .validate()
            .map_err(|e| field("synth", e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| field("train", e.to_string()))?;
        self.augment
            .validate()
            .map_err(|e| field("augment", e.to_string()))?;
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(field(
                "synth.test_fraction",
                format!("{} outside [0, 1]", self.test_fraction),
            ));
        }
        if self.pca_side == 0 {
            return Err(field("pca.side", "must be >= 1".into()));
        }
        if self.train_image_side == 0 {
            return Err(field("train.image_side", "must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.render_alpha) {
            return Err(field(
                "render.alpha",
                format!("{} outside [0, 1]", self.render_alpha),
            ));
        }
        if self.render_tile == 0 {
            return Err(field("render.tile", "must be >= 1".into()));
        }
        if self.train_subpop.is_empty() {
            return Err(field("synth.train_subpop", "must be non-empty".into()));
        }
        Ok(())
    }

    /// Deterministic echo of the full effective configuration, in the same
    /// sectioned format the config file uses.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "[synth]");
        let _ = writeln!(s, "n_per_cell = {}", self.synth.n_per_cell);
        let _ = writeln!(s, "tone_a = {:.16e}", self.synth.tone_a);
        let _ = writeln!(s, "tone_b = {:.16e}", self.synth.tone_b);
        let _ = writeln!(s, "tone_jitter = {:.16e}", self.synth.tone_jitter);
        let _ = writeln!(s, "image_side = {}", self.synth.image_side);
        let _ = writeln!(s, "noise_std = {:.16e}", self.synth.noise_std);
        let _ = writeln!(s, "contrast_falloff = {:.16e}", self.synth.contrast_falloff);
        let _ = writeln!(s, "train_subpop = {}", self.train_subpop);
        let _ = writeln!(s, "test_fraction = {:.16e}", self.test_fraction);
        let _ = writeln!(s, "[pca]");
        let _ = writeln!(s, "side = {}", self.pca_side);
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "rows = {}", self.grid_rows);
        let _ = writeln!(s, "cols = {}", self.grid_cols);
        let _ = writeln!(s, "[train]");
        let _ = writeln!(s, "learning_rate = {:.16e}", self.train.learning_rate);
        let _ = writeln!(s, "beta1 = {:.16e}", self.train.beta1);
        let _ = writeln!(s, "beta2 = {:.16e}", self.train.beta2);
        let _ = writeln!(s, "epsilon = {:.16e}", self.train.epsilon_adam);
        let _ = writeln!(s, "batch_size = {}", self.train.batch_size);
        let _ = writeln!(s, "epochs = {}", self.train.epochs);
        let _ = writeln!(s, "image_side = {}", self.train_image_side);
        let _ = writeln!(s, "grayscale = {}", self.train_grayscale);
        let _ = writeln!(s, "[augment]");
        let _ = writeln!(s, "enabled = {}", self.augment_enabled);
        let _ = writeln!(s, "rescale_lo = {:.16e}", self.augment.rescale.0);
        let _ = writeln!(s, "rescale_hi = {:.16e}", self.augment.rescale.1);
        let _ = writeln!(s, "shear_max = {:.16e}", self.augment.shear_max);
        let _ = writeln!(s, "zoom_lo = {:.16e}", self.augment.zoom.0);
        let _ = writeln!(s, "zoom_hi = {:.16e}", self.augment.zoom.1);
        let _ = writeln!(s, "hflip_prob = {:.16e}", self.augment.hflip_prob);
        let _ = writeln!(s, "[render]");
        let _ = writeln!(s, "alpha = {:.16e}", self.render_alpha);
        let _ = writeln!(s, "tile = {}", self.render_tile);
        let _ = writeln!(s, "[audit]");
        let _ = writeln!(s, "hard_outputs = {}", self.hard_outputs);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_round_trips_through_render() {
        let mut a = RunConfig::default();
        a.apply_text(
            "[run]\nseed = 7\n[synth]\nn_per_cell = 5\ntone_b = 0.4\n[train]\nepochs = 2\ngrayscale = true\n",
            Path::new("c.ini"),
        )
        .unwrap();
        assert_eq!(a.seed, 7);
        assert_eq!(a.synth.rng_seed, 7);
        assert_eq!(a.synth.n_per_cell, 5);
        assert_eq!(a.train.epochs, 2);
        assert!(a.train_grayscale);

        let mut b = RunConfig::default();
        b.apply_text(&a.render(), Path::new("echo.ini")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_field_names_the_key() {
        let mut c = RunConfig::default();
        let err = c
            .apply_text("[synth]\nbogus = 3\n", Path::new("c.ini"))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn invalid_tone_fails_validation_naming_field() {
        let mut c = RunConfig::default();
        c.apply_text("[synth]\ntone_a = 0.99\n", Path::new("c.ini")).unwrap();
        let err = c.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tone_a"), "{msg}");
    }
}
