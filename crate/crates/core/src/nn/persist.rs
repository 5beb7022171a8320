//! Versioned text persistence for models: architecture, flat parameter
//! arrays at 17 significant digits, and the training config that produced
//! the weights.

use super::{
    BatchNorm, Conv, Dense, Dropout, Flatten, Layer, MaxPool, Model, NnError, Relu, Sigmoid,
    TrainConfig,
};
use std::path::Path;

const HEADER: &str = "biaslens model v1";

pub fn model_to_text(model: &Model, config: &TrainConfig) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("seed {}\n", config.rng_seed));
    out.push_str(&format!(
        "train lr {:.16e} beta1 {:.16e} beta2 {:.16e} epsilon {:.16e} batch_size {} epochs {}\n",
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon_adam,
        config.batch_size,
        config.epochs
    ));
    out.push_str(&format!("layers {}\n", model.layers().len()));
    for layer in model.layers() {
        match layer {
            Layer::Conv(l) => {
                out.push_str(&format!(
                    "conv out_ch {} in_ch {} kh {} kw {} stride {} cross_correlation {}\n",
                    l.out_ch, l.in_ch, l.kh, l.kw, l.stride, u8::from(l.cross_correlation)
                ));
                push_tensor(&mut out, "kernels", &l.kernels);
                push_tensor(&mut out, "bias", &l.bias);
            }
            Layer::Relu(_) => out.push_str("relu\n"),
            Layer::MaxPool(l) => {
                out.push_str(&format!("maxpool window {} stride {}\n", l.window, l.stride));
            }
            Layer::Flatten(_) => out.push_str("flatten\n"),
            Layer::Dense(l) => {
                out.push_str(&format!("dense out {} in {}\n", l.out_dim, l.in_dim));
                push_tensor(&mut out, "weights", &l.weights);
                push_tensor(&mut out, "bias", &l.bias);
            }
            Layer::Dropout(l) => out.push_str(&format!("dropout rate {:.16e}\n", l.rate)),
            Layer::BatchNorm(l) => {
                out.push_str(&format!(
                    "batchnorm channels {} epsilon {:.16e} momentum {:.16e}\n",
                    l.channels, l.epsilon, l.momentum
                ));
                push_tensor(&mut out, "gamma", &l.gamma);
                push_tensor(&mut out, "beta", &l.beta);
                push_tensor(&mut out, "running_mean", &l.running_mean);
                push_tensor(&mut out, "running_var", &l.running_var);
            }
            Layer::Sigmoid(_) => out.push_str("sigmoid\n"),
        }
    }
    out.push_str("end\n");
    out
}

fn push_tensor(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(&format!("tensor {name} {}\n", values.len()));
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&format!("{v:.16e}"));
        first = false;
    }
    out.push('\n');
}

pub fn save_model(model: &Model, config: &TrainConfig, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, model_to_text(model, config))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Model, TrainConfig), NnError> {
    let text = std::fs::read_to_string(path)?;
    model_from_text(&text)
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), NnError> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or(NnError::Parse { line: 0, detail: "unexpected end of file".into() })
    }
}

fn parse_err(line: usize, detail: impl Into<String>) -> NnError {
    NnError::Parse { line, detail: detail.into() }
}

fn field<T: std::str::FromStr>(
    tokens: &[&str],
    key: &str,
    line: usize,
) -> Result<T, NnError> {
    let pos = tokens
        .iter()
        .position(|t| *t == key)
        .ok_or_else(|| parse_err(line, format!("missing field {key}")))?;
    let raw = tokens
        .get(pos + 1)
        .ok_or_else(|| parse_err(line, format!("field {key} has no value")))?;
    raw.parse::<T>()
        .map_err(|_| parse_err(line, format!("field {key}: cannot parse {raw:?}")))
}

fn read_tensor(reader: &mut Reader, name: &str, expected: usize) -> Result<Vec<f64>, NnError> {
    let (line, header) = reader.next()?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 || tokens[0] != "tensor" || tokens[1] != name {
        return Err(parse_err(line, format!("expected `tensor {name} <len>`, got {header:?}")));
    }
    let len: usize = tokens[2]
        .parse()
        .map_err(|_| parse_err(line, format!("bad tensor length {:?}", tokens[2])))?;
    if len != expected {
        return Err(parse_err(
            line,
            format!("tensor {name} has {len} values, layer shape needs {expected}"),
        ));
    }
    let (vline, values) = reader.next()?;
    let parsed: Result<Vec<f64>, _> = values
        .split_whitespace()
        .map(|v| v.parse::<f64>())
        .collect();
    let parsed = parsed.map_err(|e| parse_err(vline, format!("bad value: {e}")))?;
    if parsed.len() != len {
        return Err(parse_err(
            vline,
            format!("tensor {name}: expected {len} values, found {}", parsed.len()),
        ));
    }
    Ok(parsed)
}

pub fn model_from_text(text: &str) -> Result<(Model, TrainConfig), NnError> {
    let mut reader = Reader { lines: text.lines().enumerate() };

    let (_, header) = reader.next()?;
    if header.trim() != HEADER {
        return Err(NnError::BadVersion { got: header.trim().to_string() });
    }

    let (line, seed_line) = reader.next()?;
    let seed_tokens: Vec<&str> = seed_line.split_whitespace().collect();
    if seed_tokens.len() != 2 || seed_tokens[0] != "seed" {
        return Err(parse_err(line, format!("expected `seed <u64>`, got {seed_line:?}")));
    }
    let rng_seed: u64 = seed_tokens[1]
        .parse()
        .map_err(|_| parse_err(line, format!("bad seed {:?}", seed_tokens[1])))?;

    let (line, train_line) = reader.next()?;
    let t: Vec<&str> = train_line.split_whitespace().collect();
    if t.first() != Some(&"train") {
        return Err(parse_err(line, format!("expected train config, got {train_line:?}")));
    }
    let config = TrainConfig {
        learning_rate: field(&t, "lr", line)?,
        beta1: field(&t, "beta1", line)?,
        beta2: field(&t, "beta2", line)?,
        epsilon_adam: field(&t, "epsilon", line)?,
        batch_size: field(&t, "batch_size", line)?,
        epochs: field(&t, "epochs", line)?,
        rng_seed,
    };

    let (line, layers_line) = reader.next()?;
    let t: Vec<&str> = layers_line.split_whitespace().collect();
    if t.len() != 2 || t[0] != "layers" {
        return Err(parse_err(line, format!("expected `layers <count>`, got {layers_line:?}")));
    }
    let count: usize = t[1]
        .parse()
        .map_err(|_| parse_err(line, format!("bad layer count {:?}", t[1])))?;

    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, layer_line) = reader.next()?;
        let t: Vec<&str> = layer_line.split_whitespace().collect();
        match t.first().copied() {
            Some("conv") => {
                let out_ch = field(&t, "out_ch", line)?;
                let in_ch = field(&t, "in_ch", line)?;
                let kh = field(&t, "kh", line)?;
                let kw = field(&t, "kw", line)?;
                let stride = field(&t, "stride", line)?;
                let cc: u8 = field(&t, "cross_correlation", line)?;
                let mut conv = Conv::new(out_ch, in_ch, kh, kw, stride)?;
                conv.cross_correlation = cc != 0;
                conv.kernels = read_tensor(&mut reader, "kernels", conv.kernels.len())?;
                conv.bias = read_tensor(&mut reader, "bias", conv.bias.len())?;
                layers.push(Layer::Conv(conv));
            }
            Some("relu") => layers.push(Layer::Relu(Relu::default())),
            Some("maxpool") => {
                let window = field(&t, "window", line)?;
                let stride = field(&t, "stride", line)?;
                layers.push(Layer::MaxPool(MaxPool::new(window, stride)?));
            }
            Some("flatten") => layers.push(Layer::Flatten(Flatten::default())),
            Some("dense") => {
                let out_dim = field(&t, "out", line)?;
                let in_dim = field(&t, "in", line)?;
                let mut dense = Dense::new(out_dim, in_dim)?;
                dense.weights = read_tensor(&mut reader, "weights", dense.weights.len())?;
                dense.bias = read_tensor(&mut reader, "bias", dense.bias.len())?;
                layers.push(Layer::Dense(dense));
            }
            Some("dropout") => {
                let rate = field(&t, "rate", line)?;
                layers.push(Layer::Dropout(Dropout::new(rate)?));
            }
            Some("batchnorm") => {
                let channels = field(&t, "channels", line)?;
                let epsilon = field(&t, "epsilon", line)?;
                let momentum = field(&t, "momentum", line)?;
                let mut bn = BatchNorm::new(channels, epsilon, momentum)?;
                bn.gamma = read_tensor(&mut reader, "gamma", channels)?;
                bn.beta = read_tensor(&mut reader, "beta", channels)?;
                bn.running_mean = read_tensor(&mut reader, "running_mean", channels)?;
                bn.running_var = read_tensor(&mut reader, "running_var", channels)?;
                layers.push(Layer::BatchNorm(bn));
            }
            Some("sigmoid") => layers.push(Layer::Sigmoid(Sigmoid::default())),
            other => {
                return Err(parse_err(line, format!("unknown layer {other:?}")));
            }
        }
    }
    let (line, end) = reader.next()?;
    if end.trim() != "end" {
        return Err(parse_err(line, format!("expected `end`, got {end:?}")));
    }
    Ok((Model::new(layers)?, config))
}
