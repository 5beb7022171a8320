//! Central finite-difference checks of every analytic gradient: parameters,
//! batchnorm scale/shift, and the input itself.

use biaslens_core::nn::{
    bce_loss, default_cnn_no_dropout, probabilities, BatchNorm, Conv, Dense, Flatten, Layer,
    MaxPool, Mode, Model, Relu, Sigmoid,
};
use biaslens_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;
/// Central differences in f64 cannot resolve differences much below
/// eps * |loss| / (2h) ~ 5e-12; gradients that agree to within this floor
/// are at the oracle's own noise level (e.g. a conv bias feeding batchnorm
/// has an exactly-zero true gradient but nonzero FD noise).
const FD_NOISE_FLOOR: f64 = 1e-9;

fn grads_agree(a: f64, b: f64) -> bool {
    let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
    rel < REL_TOL || (a - b).abs() <= FD_NOISE_FLOOR
}

/// Mean bce over the batch, forwarded under the model's current mode.
fn batch_loss(model: &mut Model, inputs: &[Tensor], labels: &[u8]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = model.forward(inputs.to_vec(), &mut rng).unwrap();
    let probs = probabilities(&out).unwrap();
    probs
        .iter()
        .zip(labels)
        .map(|(&o, &y)| bce_loss(y, o).unwrap())
        .sum::<f64>()
        / probs.len() as f64
}

/// Checks every parameter gradient and the gradient of each input tensor
/// against central differences. Panics with context on the worst offender.
fn check_model_gradients(model: &mut Model, inputs: &[Tensor], labels: &[u8], context: &str) {
    // Analytic pass.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = model.forward(inputs.to_vec(), &mut rng).unwrap();
    let probs = probabilities(&out).unwrap();
    let input_grads = model.backward_bce(&probs, labels).unwrap();
    let analytic: Vec<Vec<f64>> = model
        .params_and_grads()
        .iter()
        .map(|(_, g)| (*g).clone())
        .collect();

    // Parameter gradients.
    let n_slots = analytic.len();
    for slot in 0..n_slots {
        for i in 0..analytic[slot].len() {
            let nudge = |model: &mut Model, delta: f64| {
                let mut pg = model.params_and_grads();
                pg[slot].0[i] += delta;
            };
            nudge(model, H);
            let lp = batch_loss(model, inputs, labels);
            nudge(model, -2.0 * H);
            let lm = batch_loss(model, inputs, labels);
            nudge(model, H);
            let numeric = (lp - lm) / (2.0 * H);
            let a = analytic[slot][i];
            assert!(
                grads_agree(a, numeric),
                "{context}: param slot {slot} index {i}: analytic {a} vs numeric {numeric}"
            );
        }
    }

    // Input gradients.
    let mut inputs = inputs.to_vec();
    for (s, grad) in input_grads.iter().enumerate() {
        for i in 0..inputs[s].data.len() {
            inputs[s].data[i] += H;
            let lp = batch_loss(model, &inputs, labels);
            inputs[s].data[i] -= 2.0 * H;
            let lm = batch_loss(model, &inputs, labels);
            inputs[s].data[i] += H;
            let numeric = (lp - lm) / (2.0 * H);
            let a = grad.data[i];
            assert!(
                grads_agree(a, numeric),
                "{context}: input {s} pixel {i}: analytic {a} vs numeric {numeric}"
            );
        }
    }
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    Tensor::new(h, w, c, (0..h * w * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

#[test]
fn tiny_cnn_gradients_match_finite_differences() {
    for seed in [2u64, 5, 6] {
        let mut model = default_cnn_no_dropout(13, 14, 1, seed).unwrap();
        model.set_mode(Mode::Inference);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(91));
        let input = random_image(&mut rng, 13, 14, 1);
        let label = (seed % 2) as u8;
        check_model_gradients(&mut model, &[input], &[label], &format!("seed {seed}"));
    }
}

#[test]
fn multichannel_conv_stack_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut conv = Conv::new(4, 3, 3, 3, 2).unwrap();
    conv.init(&mut rng);
    let mut dense = Dense::new(1, 4 * 3 * 3).unwrap();
    dense.init(&mut rng);
    let mut model = Model::new(vec![
        Layer::Conv(conv),
        Layer::Relu(Relu::default()),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(dense),
        Layer::Sigmoid(Sigmoid::default()),
    ])
    .unwrap();
    model.set_mode(Mode::Inference);
    let input = random_image(&mut rng, 7, 7, 3);
    check_model_gradients(&mut model, &[input], &[1], "multichannel conv");
}

#[test]
fn cross_correlation_variant_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut conv = Conv::new(2, 1, 3, 3, 1).unwrap();
    conv.init(&mut rng);
    conv.cross_correlation = true;
    let mut dense = Dense::new(1, 2 * 2 * 2).unwrap();
    dense.init(&mut rng);
    let mut model = Model::new(vec![
        Layer::Conv(conv),
        Layer::MaxPool(MaxPool::new(2, 1).unwrap()),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(dense),
        Layer::Sigmoid(Sigmoid::default()),
    ])
    .unwrap();
    model.set_mode(Mode::Inference);
    let input = random_image(&mut rng, 5, 5, 1);
    check_model_gradients(&mut model, &[input], &[0], "cross-correlation conv");
}

#[test]
fn batchnorm_training_mode_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut conv = Conv::new(3, 1, 3, 3, 1).unwrap();
    conv.init(&mut rng);
    let mut bn = BatchNorm::new(3, 1e-5, 0.1).unwrap();
    bn.gamma = vec![1.2, 0.8, 1.0];
    bn.beta = vec![0.1, -0.2, 0.0];
    let mut dense = Dense::new(1, 3 * 3 * 3).unwrap();
    dense.init(&mut rng);
    let mut model = Model::new(vec![
        Layer::Conv(conv),
        Layer::BatchNorm(bn),
        Layer::Relu(Relu::default()),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(dense),
        Layer::Sigmoid(Sigmoid::default()),
    ])
    .unwrap();
    model.set_mode(Mode::Training);
    let inputs: Vec<Tensor> = (0..3).map(|_| random_image(&mut rng, 5, 5, 1)).collect();
    let labels = [1u8, 0, 1];
    // Finite differences see the same batch statistics because the whole
    // batch is re-forwarded per probe.
    check_model_gradients(&mut model, &inputs, &labels, "batchnorm training");
}

#[test]
fn batchnorm_inference_mode_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut bn = BatchNorm::new(2, 1e-5, 0.1).unwrap();
    bn.gamma = vec![1.5, 0.7];
    bn.beta = vec![0.3, -0.1];
    bn.running_mean = vec![0.4, 0.6];
    bn.running_var = vec![0.5, 0.25];
    let mut dense = Dense::new(1, 4 * 4 * 2).unwrap();
    dense.init(&mut rng);
    let mut model = Model::new(vec![
        Layer::BatchNorm(bn),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(dense),
        Layer::Sigmoid(Sigmoid::default()),
    ])
    .unwrap();
    model.set_mode(Mode::Inference);
    let input = random_image(&mut rng, 4, 4, 2);
    check_model_gradients(&mut model, &[input], &[1], "batchnorm inference");
}

#[test]
fn batch_of_two_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut model = default_cnn_no_dropout(12, 12, 1, 5).unwrap();
    model.set_mode(Mode::Inference);
    let inputs: Vec<Tensor> = (0..2).map(|_| random_image(&mut rng, 12, 12, 1)).collect();
    check_model_gradients(&mut model, &inputs, &[0, 1], "batch of two");
}

#[test]
fn saliency_matches_finite_difference_sensitivity() {
    let mut model = default_cnn_no_dropout(12, 12, 1, 77).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let image = random_image(&mut rng, 12, 12, 1);
    let map = biaslens_core::nn::input_saliency(&mut model, &image).unwrap();

    // Independent sensitivities: |d output / d pixel| by central differences,
    // normalized the same way.
    let mut fd = vec![0.0; image.data.len()];
    let mut probe = image.clone();
    for i in 0..probe.data.len() {
        probe.data[i] += H;
        let op = model.predict(vec![probe.clone()]).unwrap()[0];
        probe.data[i] -= 2.0 * H;
        let om = model.predict(vec![probe.clone()]).unwrap()[0];
        probe.data[i] += H;
        fd[i] = ((op - om) / (2.0 * H)).abs();
    }
    biaslens_core::nn::minmax_normalize(&mut fd);
    for (i, (&a, &b)) in map.data.iter().zip(&fd).enumerate() {
        assert!(
            (a - b).abs() / a.abs().max(b.abs()).max(1e-8) < 1e-4,
            "pixel {i}: saliency {a} vs finite difference {b}"
        );
    }
}
