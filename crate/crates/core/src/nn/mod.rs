//! A small convolutional network: layer stack, reverse-mode gradients,
//! Adam training, evaluation and input-gradient saliency.

mod adam;
mod layers;
mod persist;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    sigmoid_scalar, Batch, BatchNorm, Conv, Dense, Dropout, Flatten, Layer, MaxPool, Relu, Sigmoid,
};
pub use persist::{load_model, model_from_text, model_to_text, save_model};
pub use train::{evaluate, predict_all, train, EpochStats, Metrics, TrainConfig};

use crate::augment::AugmentError;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Numerical floor used when clamping probabilities inside the loss.
pub const BCE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: &'static str, detail: String },
    #[error("dropout rate {rate} outside [0, 1)")]
    BadDropoutRate { rate: f64 },
    #[error("batchnorm epsilon must be positive, got {epsilon}")]
    BadEpsilon { epsilon: f64 },
    #[error("batchnorm training requires batch size >= 2, got {got}")]
    SmallBatch { got: usize },
    #[error("label {value} outside {{0, 1}}")]
    BadLabel { value: u8 },
    #[error("backward called without cached forward activations")]
    MissingCache,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dataset has {images} images but {labels} labels")]
    DatasetMismatch { images: usize, labels: usize },
    #[error("invalid training config: {detail}")]
    BadConfig { detail: String },
    #[error("adam state has {state} slots but the model exposes {params} parameter tensors")]
    AdamShape { state: usize, params: usize },
    #[error("adam: parameter tensor {slot} has {params} values but gradient has {grads}")]
    AdamGradShape { slot: usize, params: usize, grads: usize },
    #[error("model must end with a sigmoid layer")]
    MissingSigmoid,
    #[error("model output has {len} values, expected a scalar probability")]
    NonScalarOutput { len: usize },
    #[error("model file: {detail} (line {line})")]
    Parse { line: usize, detail: String },
    #[error("unsupported model file header: {got:?}")]
    BadVersion { got: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

/// Whether stochastic layers are active and which statistics batchnorm uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// An ordered layer stack ending in a sigmoid head.
#[derive(Debug, Clone)]
pub struct Model {
    layers: Vec<Layer>,
    mode: Mode,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        match layers.last() {
            Some(Layer::Sigmoid(_)) => Ok(Self { layers, mode: Mode::Inference }),
            _ => Err(NnError::MissingSigmoid),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Run the stack in order under the current mode, keeping caches for a
    /// following backward pass. `rng` drives dropout in training mode.
    pub fn forward(&mut self, batch: Batch, rng: &mut ChaCha8Rng) -> Result<Batch, NnError> {
        let mut activ = batch;
        for layer in &mut self.layers {
            activ = layer.forward(activ, self.mode, rng)?;
        }
        Ok(activ)
    }

    /// Inference-mode forward that needs no caller-provided generator.
    pub fn predict(&mut self, batch: Batch) -> Result<Vec<f64>, NnError> {
        let saved = self.mode;
        self.mode = Mode::Inference;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = self.forward(batch, &mut rng);
        self.mode = saved;
        scalar_outputs(&result?)
    }

    /// Reverse pass from an arbitrary gradient at the network output.
    /// Returns the gradient with respect to each input tensor.
    pub fn backward(&mut self, grad_out: Batch) -> Result<Batch, NnError> {
        let mut grad = grad_out;
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    /// Reverse pass for the mean binary cross entropy over the batch.
    /// Parameter gradients come out as the batch-mean loss gradients.
    pub fn backward_bce(&mut self, probs: &[f64], labels: &[u8]) -> Result<Batch, NnError> {
        let b = probs.len() as f64;
        let mut seed = Vec::with_capacity(probs.len());
        for (&o, &y) in probs.iter().zip(labels) {
            if y > 1 {
                return Err(NnError::BadLabel { value: y });
            }
            let o = o.clamp(BCE_EPS, 1.0 - BCE_EPS);
            let y = y as f64;
            let dl_do = (-y / o + (1.0 - y) / (1.0 - o)) / b;
            seed.push(Tensor::from_vec(vec![dl_do]));
        }
        self.backward(seed)
    }

    /// Parameter tensors paired with their last-computed gradients, in a
    /// fixed stack order (the Adam slot order).
    pub fn params_and_grads(&mut self) -> Vec<(&mut Vec<f64>, &Vec<f64>)> {
        let mut out: Vec<(&mut Vec<f64>, &Vec<f64>)> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(l) => {
                    out.push((&mut l.kernels, &l.d_kernels));
                    out.push((&mut l.bias, &l.d_bias));
                }
                Layer::Dense(l) => {
                    out.push((&mut l.weights, &l.d_weights));
                    out.push((&mut l.bias, &l.d_bias));
                }
                Layer::BatchNorm(l) => {
                    out.push((&mut l.gamma, &l.d_gamma));
                    out.push((&mut l.beta, &l.d_beta));
                }
                _ => {}
            }
        }
        out
    }

    /// Lengths of the parameter tensors in slot order.
    pub fn param_shapes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(l) => {
                    out.push(l.kernels.len());
                    out.push(l.bias.len());
                }
                Layer::Dense(l) => {
                    out.push(l.weights.len());
                    out.push(l.bias.len());
                }
                Layer::BatchNorm(l) => {
                    out.push(l.gamma.len());
                    out.push(l.beta.len());
                }
                _ => {}
            }
        }
        out
    }
}

fn scalar_outputs(batch: &Batch) -> Result<Vec<f64>, NnError> {
    batch
        .iter()
        .map(|t| {
            if t.len() == 1 {
                Ok(t.data[0])
            } else {
                Err(NnError::NonScalarOutput { len: t.len() })
            }
        })
        .collect()
}

/// Scalar outputs of a forward batch (errors unless every output is scalar).
pub fn probabilities(batch: &Batch) -> Result<Vec<f64>, NnError> {
    scalar_outputs(batch)
}

/// Binary cross entropy with the output clamped to [eps, 1-eps].
pub fn bce_loss(y: u8, o: f64) -> Result<f64, NnError> {
    if y > 1 {
        return Err(NnError::BadLabel { value: y });
    }
    let o = o.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let y = y as f64;
    Ok(-(y * o.ln() + (1.0 - y) * (1.0 - o).ln()))
}

/// Rectifier on a scalar, the elementwise rule used by the ReLU layer.
pub fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Min-max normalize to [0, 1]; a constant map collapses to all zeros.
pub fn minmax_normalize(values: &mut [f64]) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let span = hi - lo;
    if span <= 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - lo) / span);
    }
}

/// |d output / d pixel| reduced over channels by max, then min-max
/// normalized. Runs the model in inference mode; an all-zero gradient yields
/// an all-zero map.
pub fn input_saliency(model: &mut Model, image: &Tensor) -> Result<Tensor, NnError> {
    let saved = model.mode();
    model.set_mode(Mode::Inference);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let result = (|| {
        let out = model.forward(vec![image.clone()], &mut rng)?;
        scalar_outputs(&out)?;
        let grads = model.backward(vec![Tensor::from_vec(vec![1.0])])?;
        let g = &grads[0];
        let mut map = Tensor::zeros(image.h, image.w, 1);
        for y in 0..image.h {
            for x in 0..image.w {
                let mut best: f64 = 0.0;
                for ch in 0..image.c {
                    best = best.max(g.get(y, x, ch).abs());
                }
                map.set(y, x, 0, best);
            }
        }
        minmax_normalize(&mut map.data);
        Ok(map)
    })();
    model.set_mode(saved);
    result
}

/// The desk-scale architecture: two conv/pool stages, then a three-dense
/// head with dropout between the fully connected layers.
pub fn default_cnn(
    input_h: usize,
    input_w: usize,
    input_c: usize,
    seed: u64,
) -> Result<Model, NnError> {
    build_cnn(input_h, input_w, input_c, seed, true)
}

/// Same stack without dropout (deterministic variant used by gradient checks).
pub fn default_cnn_no_dropout(
    input_h: usize,
    input_w: usize,
    input_c: usize,
    seed: u64,
) -> Result<Model, NnError> {
    build_cnn(input_h, input_w, input_c, seed, false)
}

fn build_cnn(
    input_h: usize,
    input_w: usize,
    input_c: usize,
    seed: u64,
    dropout: bool,
) -> Result<Model, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();

    let conv_out = |h: usize, k: usize| h.checked_sub(k - 1);
    let pool_out = |h: usize| if h >= 2 { Some((h - 2) / 2 + 1) } else { None };
    let too_small = || NnError::Shape {
        layer: "conv",
        detail: format!("input {input_h}x{input_w}x{input_c} too small for the default stack"),
    };

    let mut conv1 = Conv::new(8, input_c, 3, 3, 1)?;
    conv1.init(&mut rng);
    layers.push(Layer::Conv(conv1));
    layers.push(Layer::Relu(Relu::default()));
    layers.push(Layer::MaxPool(MaxPool::new(2, 2)?));
    let h = conv_out(input_h, 3).and_then(pool_out).ok_or_else(too_small)?;
    let w = conv_out(input_w, 3).and_then(pool_out).ok_or_else(too_small)?;

    let mut conv2 = Conv::new(16, 8, 3, 3, 1)?;
    conv2.init(&mut rng);
    layers.push(Layer::Conv(conv2));
    layers.push(Layer::Relu(Relu::default()));
    layers.push(Layer::MaxPool(MaxPool::new(2, 2)?));
    let h = conv_out(h, 3).and_then(pool_out).ok_or_else(too_small)?;
    let w = conv_out(w, 3).and_then(pool_out).ok_or_else(too_small)?;

    layers.push(Layer::Flatten(Flatten::default()));
    let flat = h * w * 16;

    let mut dense1 = Dense::new(64, flat)?;
    dense1.init(&mut rng);
    layers.push(Layer::Dense(dense1));
    layers.push(Layer::Relu(Relu::default()));
    if dropout {
        layers.push(Layer::Dropout(Dropout::new(0.5)?));
    }

    let mut dense2 = Dense::new(16, 64)?;
    dense2.init(&mut rng);
    layers.push(Layer::Dense(dense2));
    layers.push(Layer::Relu(Relu::default()));

    let mut dense3 = Dense::new(1, 16)?;
    dense3.init(&mut rng);
    layers.push(Layer::Dense(dense3));
    layers.push(Layer::Sigmoid(Sigmoid::default()));

    Model::new(layers)
}
