//! Seeded mini-batch training and inference-mode evaluation.

use super::{bce_loss, probabilities, AdamConfig, AdamState, Mode, Model, NnError};
use crate::augment::{augment, sample_params, AugmentConfig};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_adam: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_adam: 1e-8,
            batch_size: 32,
            epochs: 30,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::BadConfig { detail: "batch_size must be >= 1".into() });
        }
        if self.epochs == 0 {
            return Err(NnError::BadConfig { detail: "epochs must be >= 1".into() });
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon_adam,
        }
    }
}

/// Mean training loss and accuracy over one epoch, measured on the
/// training-mode forward outputs that drove the updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// Inference-mode metrics at decision threshold 0.5 (o >= 0.5 predicts 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub mean_bce: f64,
}

fn check_dataset(images: &[Tensor], labels: &[u8]) -> Result<(), NnError> {
    if images.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if images.len() != labels.len() {
        return Err(NnError::DatasetMismatch { images: images.len(), labels: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(NnError::BadLabel { value: bad });
    }
    Ok(())
}

/// Mini-batch Adam on the binary cross entropy.
///
/// Shuffling and dropout draw from one generator seeded by
/// `config.rng_seed`; augmentation parameters draw from a second generator
/// seeded by `augment_config.rng_seed`. Runs are byte-reproducible.
pub fn train(
    model: &mut Model,
    images: &[Tensor],
    labels: &[u8],
    config: &TrainConfig,
    augment_config: Option<&AugmentConfig>,
) -> Result<Vec<EpochStats>, NnError> {
    check_dataset(images, labels)?;
    config.validate()?;
    if let Some(ac) = augment_config {
        ac.validate()?;
    }

    let mut train_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut aug_rng = augment_config.map(|ac| ChaCha8Rng::seed_from_u64(ac.rng_seed));
    let mut adam = AdamState::new(&model.param_shapes());
    let adam_config = config.adam();
    let mut history = Vec::with_capacity(config.epochs);

    let n = images.len();
    let mut order: Vec<usize> = (0..n).collect();
    model.set_mode(Mode::Training);

    for epoch in 0..config.epochs {
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            let mut batch_labels = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let image = match (&augment_config, &mut aug_rng) {
                    (Some(ac), Some(rng)) => {
                        let params = sample_params(ac, rng);
                        augment(&images[i], &params)?
                    }
                    _ => images[i].clone(),
                };
                batch.push(image);
                batch_labels.push(labels[i]);
            }
            let out = model.forward(batch, &mut train_rng)?;
            let probs = probabilities(&out)?;
            for (&o, &y) in probs.iter().zip(&batch_labels) {
                loss_sum += bce_loss(y, o)?;
                if (o >= 0.5) == (y == 1) {
                    correct += 1;
                }
            }
            model.backward_bce(&probs, &batch_labels)?;
            let mut params_grads = model.params_and_grads();
            adam.step(&mut params_grads, &adam_config)?;
        }
        history.push(EpochStats {
            epoch,
            mean_loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    model.set_mode(Mode::Inference);
    Ok(history)
}

/// Accuracy and mean binary cross entropy in inference mode.
pub fn evaluate(model: &mut Model, images: &[Tensor], labels: &[u8]) -> Result<Metrics, NnError> {
    check_dataset(images, labels)?;
    let probs = predict_all(model, images)?;
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (&o, &y) in probs.iter().zip(labels) {
        loss_sum += bce_loss(y, o)?;
        if (o >= 0.5) == (y == 1) {
            correct += 1;
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / images.len() as f64,
        mean_bce: loss_sum / images.len() as f64,
    })
}

/// Inference-mode probabilities for a whole dataset, in input order.
pub fn predict_all(model: &mut Model, images: &[Tensor]) -> Result<Vec<f64>, NnError> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(64) {
        let probs = model.predict(chunk.to_vec())?;
        out.extend(probs);
    }
    Ok(out)
}
