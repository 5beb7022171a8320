//! Network layers with explicit forward caches and reverse-mode gradients.
//!
//! Layers operate on whole batches (`Vec<Tensor>`) because batch
//! normalization couples samples; every other layer maps over the batch.
//! Backward passes accumulate parameter gradients summed over the batch, so
//! putting the 1/B factor into the loss gradient yields batch means.

use super::{Mode, NnError};
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Batch = Vec<Tensor>;

/// 2-D convolution: true convolution by default (kernel flipped relative to
/// cross-correlation), valid padding, one bias per output channel.
#[derive(Debug, Clone)]
pub struct Conv {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    /// Skip the kernel flip (framework-style cross-correlation). Off by default.
    pub cross_correlation: bool,
    /// Kernels laid out [out_ch][in_ch][kh][kw].
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
    pub d_kernels: Vec<f64>,
    pub d_bias: Vec<f64>,
    cache: Option<Batch>,
}

impl Conv {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, stride: usize) -> Result<Self, NnError> {
        if out_ch == 0 || in_ch == 0 || kh == 0 || kw == 0 || stride == 0 {
            return Err(NnError::Shape {
                layer: "conv",
                detail: format!("degenerate geometry {out_ch}x{in_ch}x{kh}x{kw} stride {stride}"),
            });
        }
        let n = out_ch * in_ch * kh * kw;
        Ok(Self {
            out_ch,
            in_ch,
            kh,
            kw,
            stride,
            cross_correlation: false,
            kernels: vec![0.0; n],
            bias: vec![0.0; out_ch],
            d_kernels: vec![0.0; n],
            d_bias: vec![0.0; out_ch],
            cache: None,
        })
    }

    /// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(&mut self, rng: &mut ChaCha8Rng) {
        let bound = 1.0 / ((self.in_ch * self.kh * self.kw) as f64).sqrt();
        for k in self.kernels.iter_mut() {
            *k = rng.gen_range(-bound..bound);
        }
        for b in self.bias.iter_mut() {
            *b = 0.0;
        }
    }

    #[inline]
    fn k_at(&self, oc: usize, ic: usize, m: usize, n: usize) -> usize {
        ((oc * self.in_ch + ic) * self.kh + m) * self.kw + n
    }

    fn out_dims(&self, input: &Tensor) -> Result<(usize, usize), NnError> {
        if input.c != self.in_ch {
            return Err(NnError::Shape {
                layer: "conv",
                detail: format!("input has {} channels, kernels expect {}", input.c, self.in_ch),
            });
        }
        if input.h < self.kh || input.w < self.kw {
            return Err(NnError::Shape {
                layer: "conv",
                detail: format!(
                    "input {}x{} smaller than kernel {}x{}",
                    input.h, input.w, self.kh, self.kw
                ),
            });
        }
        Ok((
            (input.h - self.kh) / self.stride + 1,
            (input.w - self.kw) / self.stride + 1,
        ))
    }

    pub fn forward(&mut self, batch: Batch) -> Result<Batch, NnError> {
        let mut out = Vec::with_capacity(batch.len());
        for input in &batch {
            let (oh, ow) = self.out_dims(input)?;
            let mut o = Tensor::zeros(oh, ow, self.out_ch);
            for oy in 0..oh {
                for ox in 0..ow {
                    for oc in 0..self.out_ch {
                        let mut acc = self.bias[oc];
                        for ic in 0..self.in_ch {
                            for m in 0..self.kh {
                                let iy = oy * self.stride + m;
                                for n in 0..self.kw {
                                    let ix = ox * self.stride + n;
                                    let (km, kn) = self.flip(m, n);
                                    acc += input.get(iy, ix, ic)
                                        * self.kernels[self.k_at(oc, ic, km, kn)];
                                }
                            }
                        }
                        o.set(oy, ox, oc, acc);
                    }
                }
            }
            out.push(o);
        }
        self.cache = Some(batch);
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        self.d_kernels.iter_mut().for_each(|v| *v = 0.0);
        self.d_bias.iter_mut().for_each(|v| *v = 0.0);
        let mut grads_in = Vec::with_capacity(cache.len());
        for (input, g) in cache.iter().zip(grad_out) {
            let (oh, ow) = self.out_dims(input)?;
            let mut gi = Tensor::zeros(input.h, input.w, input.c);
            for oy in 0..oh {
                for ox in 0..ow {
                    for oc in 0..self.out_ch {
                        let go = g.get(oy, ox, oc);
                        if go == 0.0 {
                            continue;
                        }
                        self.d_bias[oc] += go;
                        for ic in 0..self.in_ch {
                            for m in 0..self.kh {
                                let iy = oy * self.stride + m;
                                let (km, _) = self.flip(m, 0);
                                for n in 0..self.kw {
                                    let ix = ox * self.stride + n;
                                    let (_, kn) = self.flip(m, n);
                                    let kidx = self.k_at(oc, ic, km, kn);
                                    self.d_kernels[kidx] += input.get(iy, ix, ic) * go;
                                    let gi_idx = gi.idx(iy, ix, ic);
                                    gi.data[gi_idx] += self.kernels[kidx] * go;
                                }
                            }
                        }
                    }
                }
            }
            grads_in.push(gi);
        }
        Ok(grads_in)
    }

    #[inline]
    fn flip(&self, m: usize, n: usize) -> (usize, usize) {
        if self.cross_correlation {
            (m, n)
        } else {
            (self.kh - 1 - m, self.kw - 1 - n)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache: Option<Batch>,
}

impl Relu {
    pub fn forward(&mut self, batch: Batch) -> Batch {
        let out = batch
            .iter()
            .map(|t| {
                let mut o = t.clone();
                for v in o.data.iter_mut() {
                    if *v <= 0.0 {
                        *v = 0.0;
                    }
                }
                o
            })
            .collect();
        self.cache = Some(batch);
        out
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        Ok(cache
            .iter()
            .zip(grad_out)
            .map(|(x, g)| {
                let mut gi = g.clone();
                for (gv, xv) in gi.data.iter_mut().zip(&x.data) {
                    if *xv <= 0.0 {
                        *gv = 0.0;
                    }
                }
                gi
            })
            .collect())
    }
}

/// Max pooling over square windows; argmax positions are cached for the
/// backward pass, first occurrence winning ties.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
    cache: Option<(Vec<Vec<usize>>, Vec<(usize, usize, usize)>)>,
}

impl MaxPool {
    pub fn new(window: usize, stride: usize) -> Result<Self, NnError> {
        if window == 0 || stride == 0 {
            return Err(NnError::Shape {
                layer: "maxpool",
                detail: format!("degenerate window {window} / stride {stride}"),
            });
        }
        Ok(Self { window, stride, cache: None })
    }

    pub fn forward(&mut self, batch: Batch) -> Result<Batch, NnError> {
        let mut out = Vec::with_capacity(batch.len());
        let mut argmax = Vec::with_capacity(batch.len());
        let mut shapes = Vec::with_capacity(batch.len());
        for input in &batch {
            if input.h < self.window || input.w < self.window {
                return Err(NnError::Shape {
                    layer: "maxpool",
                    detail: format!(
                        "window {} larger than input {}x{}",
                        self.window, input.h, input.w
                    ),
                });
            }
            let oh = (input.h - self.window) / self.stride + 1;
            let ow = (input.w - self.window) / self.stride + 1;
            let mut o = Tensor::zeros(oh, ow, input.c);
            let mut am = vec![0usize; oh * ow * input.c];
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..input.c {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0usize;
                        for m in 0..self.window {
                            for n in 0..self.window {
                                let iy = oy * self.stride + m;
                                let ix = ox * self.stride + n;
                                let v = input.get(iy, ix, ch);
                                if v > best {
                                    best = v;
                                    best_idx = input.idx(iy, ix, ch);
                                }
                            }
                        }
                        o.set(oy, ox, ch, best);
                        am[o.idx(oy, ox, ch)] = best_idx;
                    }
                }
            }
            out.push(o);
            argmax.push(am);
            shapes.push((input.h, input.w, input.c));
        }
        self.cache = Some((argmax, shapes));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let (argmax, shapes) = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        let mut grads_in = Vec::with_capacity(grad_out.len());
        for ((g, am), &(h, w, c)) in grad_out.iter().zip(argmax).zip(shapes) {
            let mut gi = Tensor::zeros(h, w, c);
            for (flat, &src) in am.iter().enumerate() {
                gi.data[src] += g.data[flat];
            }
            grads_in.push(gi);
        }
        Ok(grads_in)
    }
}

/// Shape-only reshape of h x w x c maps into flat vectors.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    cache: Option<Vec<(usize, usize, usize)>>,
}

impl Flatten {
    pub fn forward(&mut self, batch: Batch) -> Batch {
        let shapes = batch.iter().map(|t| (t.h, t.w, t.c)).collect();
        let out = batch
            .into_iter()
            .map(|t| Tensor::from_vec(t.data))
            .collect();
        self.cache = Some(shapes);
        out
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let shapes = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        Ok(grad_out
            .iter()
            .zip(shapes)
            .map(|(g, &(h, w, c))| Tensor { h, w, c, data: g.data.clone() })
            .collect())
    }
}

/// Fully connected layer: z = W a + b with W stored row-major out x in.
#[derive(Debug, Clone)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub d_weights: Vec<f64>,
    pub d_bias: Vec<f64>,
    cache: Option<Batch>,
}

impl Dense {
    pub fn new(out_dim: usize, in_dim: usize) -> Result<Self, NnError> {
        if out_dim == 0 || in_dim == 0 {
            return Err(NnError::Shape {
                layer: "dense",
                detail: format!("degenerate shape {out_dim}x{in_dim}"),
            });
        }
        Ok(Self {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
            d_weights: vec![0.0; out_dim * in_dim],
            d_bias: vec![0.0; out_dim],
            cache: None,
        })
    }

    pub fn init(&mut self, rng: &mut ChaCha8Rng) {
        let bound = 1.0 / (self.in_dim as f64).sqrt();
        for w in self.weights.iter_mut() {
            *w = rng.gen_range(-bound..bound);
        }
        for b in self.bias.iter_mut() {
            *b = 0.0;
        }
    }

    pub fn forward(&mut self, batch: Batch) -> Result<Batch, NnError> {
        let mut out = Vec::with_capacity(batch.len());
        for input in &batch {
            if input.len() != self.in_dim {
                return Err(NnError::Shape {
                    layer: "dense",
                    detail: format!("input length {} != {}", input.len(), self.in_dim),
                });
            }
            let mut z = vec![0.0; self.out_dim];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.bias[o];
                for (w, a) in row.iter().zip(&input.data) {
                    acc += w * a;
                }
                *zo = acc;
            }
            out.push(Tensor::from_vec(z));
        }
        self.cache = Some(batch);
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        self.d_weights.iter_mut().for_each(|v| *v = 0.0);
        self.d_bias.iter_mut().for_each(|v| *v = 0.0);
        let mut grads_in = Vec::with_capacity(cache.len());
        for (input, g) in cache.iter().zip(grad_out) {
            let mut gi = vec![0.0; self.in_dim];
            for o in 0..self.out_dim {
                let go = g.data[o];
                self.d_bias[o] += go;
                let row = o * self.in_dim;
                for i in 0..self.in_dim {
                    self.d_weights[row + i] += go * input.data[i];
                    gi[i] += self.weights[row + i] * go;
                }
            }
            grads_in.push(Tensor {
                h: input.h,
                w: input.w,
                c: input.c,
                data: gi,
            });
        }
        Ok(grads_in)
    }
}

/// Inverted dropout: units zeroed with probability `rate` during training,
/// survivors scaled by 1/(1-rate); inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    cache: Option<Option<Vec<Vec<f64>>>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::BadDropoutRate { rate });
        }
        Ok(Self { rate, cache: None })
    }

    pub fn forward(&mut self, batch: Batch, mode: Mode, rng: &mut ChaCha8Rng) -> Batch {
        if mode == Mode::Inference || self.rate == 0.0 {
            self.cache = Some(None);
            return batch;
        }
        let scale = 1.0 / (1.0 - self.rate);
        let mut masks = Vec::with_capacity(batch.len());
        let out = batch
            .into_iter()
            .map(|mut t| {
                let mask: Vec<f64> = t
                    .data
                    .iter()
                    .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { scale })
                    .collect();
                for (v, m) in t.data.iter_mut().zip(&mask) {
                    *v *= m;
                }
                masks.push(mask);
                t
            })
            .collect();
        self.cache = Some(Some(masks));
        out
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        match cache {
            None => Ok(grad_out.clone()),
            Some(masks) => Ok(grad_out
                .iter()
                .zip(masks)
                .map(|(g, mask)| {
                    let mut gi = g.clone();
                    for (v, m) in gi.data.iter_mut().zip(mask) {
                        *v *= m;
                    }
                    gi
                })
                .collect()),
        }
    }
}

/// Per-channel batch normalization with learned scale/shift and running
/// statistics for inference. `momentum` weights the new batch statistic:
/// running = (1 - momentum) * running + momentum * batch.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
    pub d_gamma: Vec<f64>,
    pub d_beta: Vec<f64>,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    training: bool,
    inputs: Batch,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, epsilon: f64, momentum: f64) -> Result<Self, NnError> {
        if epsilon <= 0.0 {
            return Err(NnError::BadEpsilon { epsilon });
        }
        if channels == 0 {
            return Err(NnError::Shape { layer: "batchnorm", detail: "zero channels".into() });
        }
        Ok(Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon,
            momentum,
            d_gamma: vec![0.0; channels],
            d_beta: vec![0.0; channels],
            cache: None,
        })
    }

    fn check_channels(&self, batch: &Batch) -> Result<(), NnError> {
        for t in batch {
            if t.c != self.channels {
                return Err(NnError::Shape {
                    layer: "batchnorm",
                    detail: format!("input has {} channels, layer expects {}", t.c, self.channels),
                });
            }
        }
        Ok(())
    }

    pub fn forward(&mut self, batch: Batch, mode: Mode) -> Result<Batch, NnError> {
        self.check_channels(&batch)?;
        match mode {
            Mode::Training => {
                if batch.len() < 2 {
                    return Err(NnError::SmallBatch { got: batch.len() });
                }
                let m = (batch.iter().map(|t| t.data.len()).sum::<usize>() / self.channels) as f64;
                let mut mean = vec![0.0; self.channels];
                for t in &batch {
                    for (i, v) in t.data.iter().enumerate() {
                        mean[i % self.channels] += v;
                    }
                }
                for mu in mean.iter_mut() {
                    *mu /= m;
                }
                let mut var = vec![0.0; self.channels];
                for t in &batch {
                    for (i, v) in t.data.iter().enumerate() {
                        let d = v - mean[i % self.channels];
                        var[i % self.channels] += d * d;
                    }
                }
                for v in var.iter_mut() {
                    *v /= m;
                }
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
                for ch in 0..self.channels {
                    self.running_mean[ch] =
                        (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean[ch];
                    self.running_var[ch] =
                        (1.0 - self.momentum) * self.running_var[ch] + self.momentum * var[ch];
                }
                let out: Batch = batch
                    .iter()
                    .map(|t| {
                        let mut o = t.clone();
                        for (i, v) in o.data.iter_mut().enumerate() {
                            let ch = i % self.channels;
                            let xhat = (*v - mean[ch]) * inv_std[ch];
                            *v = self.gamma[ch] * xhat + self.beta[ch];
                        }
                        o
                    })
                    .collect();
                self.cache = Some(BnCache { training: true, inputs: batch, mean, inv_std });
                Ok(out)
            }
            Mode::Inference => {
                let inv_std: Vec<f64> = self
                    .running_var
                    .iter()
                    .map(|v| 1.0 / (v + self.epsilon).sqrt())
                    .collect();
                let mean = self.running_mean.clone();
                let out: Batch = batch
                    .iter()
                    .map(|t| {
                        let mut o = t.clone();
                        for (i, v) in o.data.iter_mut().enumerate() {
                            let ch = i % self.channels;
                            let xhat = (*v - mean[ch]) * inv_std[ch];
                            *v = self.gamma[ch] * xhat + self.beta[ch];
                        }
                        o
                    })
                    .collect();
                self.cache = Some(BnCache { training: false, inputs: batch, mean, inv_std });
                Ok(out)
            }
        }
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        self.d_gamma.iter_mut().for_each(|v| *v = 0.0);
        self.d_beta.iter_mut().for_each(|v| *v = 0.0);
        let ch_of = |i: usize| i % self.channels;

        // dgamma / dbeta are shared by both modes.
        for (t, g) in cache.inputs.iter().zip(grad_out) {
            for (i, (v, go)) in t.data.iter().zip(&g.data).enumerate() {
                let ch = ch_of(i);
                let xhat = (*v - cache.mean[ch]) * cache.inv_std[ch];
                self.d_gamma[ch] += go * xhat;
                self.d_beta[ch] += go;
            }
        }

        if !cache.training {
            // Running statistics are constants: dx = g * gamma * inv_std.
            return Ok(grad_out
                .iter()
                .map(|g| {
                    let mut gi = g.clone();
                    for (i, v) in gi.data.iter_mut().enumerate() {
                        let ch = ch_of(i);
                        *v *= self.gamma[ch] * cache.inv_std[ch];
                    }
                    gi
                })
                .collect());
        }

        let m = (cache.inputs.iter().map(|t| t.data.len()).sum::<usize>() / self.channels) as f64;
        // Backprop through the batch statistics.
        let mut sum_dxhat = vec![0.0; self.channels];
        let mut sum_dxhat_xhat = vec![0.0; self.channels];
        for (t, g) in cache.inputs.iter().zip(grad_out) {
            for (i, (v, go)) in t.data.iter().zip(&g.data).enumerate() {
                let ch = ch_of(i);
                let dxhat = go * self.gamma[ch];
                let xhat = (*v - cache.mean[ch]) * cache.inv_std[ch];
                sum_dxhat[ch] += dxhat;
                sum_dxhat_xhat[ch] += dxhat * xhat;
            }
        }
        let grads_in = cache
            .inputs
            .iter()
            .zip(grad_out)
            .map(|(t, g)| {
                let mut gi = g.clone();
                for (i, v) in gi.data.iter_mut().enumerate() {
                    let ch = ch_of(i);
                    let dxhat = g.data[i] * self.gamma[ch];
                    let xhat = (t.data[i] - cache.mean[ch]) * cache.inv_std[ch];
                    *v = cache.inv_std[ch] / m
                        * (m * dxhat - sum_dxhat[ch] - xhat * sum_dxhat_xhat[ch]);
                }
                gi
            })
            .collect();
        Ok(grads_in)
    }
}

/// Numerically stable logistic activation.
#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    cache: Option<Batch>,
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Sigmoid {
    pub fn forward(&mut self, batch: Batch) -> Batch {
        let out: Batch = batch
            .iter()
            .map(|t| {
                let mut o = t.clone();
                for v in o.data.iter_mut() {
                    *v = sigmoid_scalar(*v);
                }
                o
            })
            .collect();
        self.cache = Some(out.clone());
        out
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        let outputs = self.cache.as_ref().ok_or(NnError::MissingCache)?;
        Ok(outputs
            .iter()
            .zip(grad_out)
            .map(|(o, g)| {
                let mut gi = g.clone();
                for (v, out) in gi.data.iter_mut().zip(&o.data) {
                    *v *= out * (1.0 - out);
                }
                gi
            })
            .collect())
    }
}

/// A network layer; the stack order defines the architecture.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv),
    Relu(Relu),
    MaxPool(MaxPool),
    Flatten(Flatten),
    Dense(Dense),
    Dropout(Dropout),
    BatchNorm(BatchNorm),
    Sigmoid(Sigmoid),
}

impl Layer {
    pub fn forward(
        &mut self,
        batch: Batch,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Batch, NnError> {
        match self {
            Layer::Conv(l) => l.forward(batch),
            Layer::Relu(l) => Ok(l.forward(batch)),
            Layer::MaxPool(l) => l.forward(batch),
            Layer::Flatten(l) => Ok(l.forward(batch)),
            Layer::Dense(l) => l.forward(batch),
            Layer::Dropout(l) => Ok(l.forward(batch, mode, rng)),
            Layer::BatchNorm(l) => l.forward(batch, mode),
            Layer::Sigmoid(l) => Ok(l.forward(batch)),
        }
    }

    pub fn backward(&mut self, grad_out: &Batch) -> Result<Batch, NnError> {
        match self {
            Layer::Conv(l) => l.backward(grad_out),
            Layer::Relu(l) => l.backward(grad_out),
            Layer::MaxPool(l) => l.backward(grad_out),
            Layer::Flatten(l) => l.backward(grad_out),
            Layer::Dense(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::BatchNorm(l) => l.backward(grad_out),
            Layer::Sigmoid(l) => l.backward(grad_out),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Dropout(_) => "dropout",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Sigmoid(_) => "sigmoid",
        }
    }
}
