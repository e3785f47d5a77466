//! Dense feed-forward networks with exact input gradients.
//!
//! A model is an ordered list of affine layers, each followed by an
//! activation. Classification models end in softmax (probabilities);
//! regression models end in identity. Logistic regression is the special case
//! with zero hidden layers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelError, Task};
use crate::data::Dataset;

/// Elementwise (or, for softmax, vector-wise) activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
    /// Only permitted on the final layer.
    Softmax,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Activation> {
        match name {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Identity => z.to_vec(),
            Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
            Activation::Softmax => softmax(z),
        }
    }

    /// Derivative at pre-activation `z`. Not defined for softmax, which never
    /// sits inside the network and is skipped when differentiating logits.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Softmax => unreachable!("softmax has no elementwise derivative"),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// One affine layer `z = W a + b` plus its activation. Weights are row-major
/// with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        if weight.len() != in_dim * out_dim {
            return Err(ModelError::InvalidArchitecture(format!(
                "weight matrix has {} entries, expected {}x{}",
                weight.len(),
                out_dim,
                in_dim
            )));
        }
        if bias.len() != out_dim {
            return Err(ModelError::InvalidArchitecture(format!(
                "bias has {} entries, expected {}",
                bias.len(),
                out_dim
            )));
        }
        Ok(LayerSpec {
            in_dim,
            out_dim,
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for (w, x) in row.iter().zip(input) {
                *zo += w * x;
            }
        }
        z
    }
}

/// A dense feed-forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<LayerSpec>,
    pub task: Task,
    pub input_dim: usize,
}

impl MlpModel {
    pub fn new(layers: Vec<LayerSpec>, task: Task, input_dim: usize) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::InvalidArchitecture("no layers".into()));
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != prev {
                return Err(ModelError::InvalidArchitecture(format!(
                    "layer {} expects {} inputs but gets {}",
                    i, layer.in_dim, prev
                )));
            }
            if layer.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(ModelError::InvalidArchitecture(
                    "softmax is only permitted on the final layer".into(),
                ));
            }
            prev = layer.out_dim;
        }
        let last = layers.last().unwrap().activation;
        match task {
            Task::Classification => {
                if !matches!(last, Activation::Softmax | Activation::Sigmoid) {
                    return Err(ModelError::InvalidArchitecture(
                        "classification models must end in softmax or sigmoid".into(),
                    ));
                }
            }
            Task::Regression => {
                if last != Activation::Identity {
                    return Err(ModelError::InvalidArchitecture(
                        "regression models must end in identity".into(),
                    ));
                }
            }
        }
        Ok(MlpModel {
            layers,
            task,
            input_dim,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Per-layer forward caches: pre-activations `z`, activations `a`, and the
/// final output (which equals the last activation).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Final-layer output for one input. Classification outputs are a probability
/// vector.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    model.check_input(x)?;
    let mut a = x.to_vec();
    for layer in &model.layers {
        let z = layer.affine(&a);
        a = layer.activation.apply(&z);
    }
    Ok(a)
}

/// Forward pass that records every layer's pre-activation and activation.
pub fn forward_trace(model: &MlpModel, x: &[f64]) -> Result<ForwardTrace, ModelError> {
    model.check_input(x)?;
    let mut pre = Vec::with_capacity(model.layers.len());
    let mut act = Vec::with_capacity(model.layers.len());
    let mut a = x.to_vec();
    for layer in &model.layers {
        let z = layer.affine(&a);
        a = layer.activation.apply(&z);
        pre.push(z);
        act.push(a.clone());
    }
    Ok(ForwardTrace {
        pre_activations: pre,
        activations: act,
        output: a,
    })
}

/// Gradient of the target score with respect to the input, by backpropagation.
///
/// The score is the final layer's pre-activation at `target`: the raw logit
/// for softmax/sigmoid classifiers, the output itself for regression. Softmax
/// gradients saturate, so explainers work on the logit.
pub fn gradient_wrt_input(
    model: &MlpModel,
    x: &[f64],
    target: usize,
) -> Result<Vec<f64>, ModelError> {
    let trace = forward_trace(model, x)?;
    let outputs = model.output_dim();
    if target >= outputs {
        return Err(ModelError::TargetOutOfRange { target, outputs });
    }
    let mut delta = vec![0.0; outputs];
    delta[target] = 1.0;
    // delta holds d(score)/d(z^l) entering the loop for layer l.
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let mut d_input = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (di, w) in d_input.iter_mut().zip(row) {
                *di += w * delta[o];
            }
        }
        if l == 0 {
            return Ok(d_input);
        }
        let z_prev = &trace.pre_activations[l - 1];
        let act_prev = model.layers[l - 1].activation;
        delta = d_input
            .iter()
            .zip(z_prev)
            .map(|(&d, &z)| d * act_prev.derivative(z))
            .collect();
    }
    unreachable!("model has at least one layer")
}

/// Target score used by the gradient-based explainers: the final layer's
/// pre-activation at `target` (see [`gradient_wrt_input`]).
pub fn logit_score(model: &MlpModel, x: &[f64], target: usize) -> Result<f64, ModelError> {
    let outputs = model.output_dim();
    if target >= outputs {
        return Err(ModelError::TargetOutOfRange { target, outputs });
    }
    let trace = forward_trace(model, x)?;
    Ok(trace.pre_activations.last().unwrap()[target])
}

/// Mini-batch SGD hyperparameters. All runs are deterministic given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weights start uniform in [-s, s] with s = init_scale / sqrt(fan_in).
    pub init_scale: f64,
    pub hidden_activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            init_scale: 1.0,
            hidden_activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(ModelError::InvalidConfig("init scale must be > 0".into()));
        }
        if self.hidden_activation == Activation::Softmax {
            return Err(ModelError::InvalidConfig(
                "softmax is only permitted on the final layer".into(),
            ));
        }
        Ok(())
    }
}

fn seeded_layer(
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    init_scale: f64,
    rng: &mut ChaCha8Rng,
) -> LayerSpec {
    let s = init_scale / (in_dim as f64).sqrt();
    let weight: Vec<f64> = (0..in_dim * out_dim)
        .map(|_| rng.gen_range(-s..s))
        .collect();
    let bias = vec![0.0; out_dim];
    LayerSpec::new(in_dim, out_dim, weight, bias, activation).expect("consistent dims")
}

/// Trains an MLP with the given hidden layer sizes by mini-batch SGD.
///
/// Classification models get `n_classes` softmax outputs and cross-entropy
/// loss; regression models get one identity output and squared loss. An empty
/// `hidden` slice yields logistic (or linear) regression. `epochs == 0`
/// returns the seeded initialization untouched.
pub fn train_mlp(
    data: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<MlpModel, ModelError> {
    cfg.validate()?;
    if data.n_rows() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if hidden.iter().any(|&h| h == 0) {
        return Err(ModelError::InvalidConfig("hidden layer of size 0".into()));
    }
    let d = data.n_features();
    let (out_dim, final_act) = match data.task() {
        Task::Classification => (data.n_classes().max(2), Activation::Softmax),
        Task::Regression => (1, Activation::Identity),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut prev = d;
    for &h in hidden {
        layers.push(seeded_layer(prev, h, cfg.hidden_activation, cfg.init_scale, &mut rng));
        prev = h;
    }
    layers.push(seeded_layer(prev, out_dim, final_act, cfg.init_scale, &mut rng));
    let mut model = MlpModel::new(layers, data.task(), d)?;

    let n = data.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the training RNG stream.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            epoch_loss += sgd_step(&mut model, data, batch, cfg.learning_rate)?;
        }
        if !epoch_loss.is_finite() {
            return Err(ModelError::TrainDiverged { epoch });
        }
    }
    Ok(model)
}

/// One mini-batch update; returns the summed per-sample loss.
fn sgd_step(
    model: &mut MlpModel,
    data: &Dataset,
    batch: &[usize],
    lr: f64,
) -> Result<f64, ModelError> {
    let n_layers = model.layers.len();
    let mut grad_w: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
    let mut loss = 0.0;

    for &idx in batch {
        let x = data.row(idx);
        let trace = forward_trace(model, x)?;
        // d(loss)/d(z^last): softmax + cross-entropy or identity + squared loss.
        let mut delta: Vec<f64> = match model.task {
            Task::Classification => {
                let y = data.label(idx);
                let p = &trace.output;
                loss += -(p[y].max(1e-300)).ln();
                let mut d = p.clone();
                d[y] -= 1.0;
                d
            }
            Task::Regression => {
                let y = data.value(idx);
                let a = trace.output[0];
                loss += 0.5 * (a - y) * (a - y);
                vec![a - y]
            }
        };
        for l in (0..n_layers).rev() {
            let layer = &model.layers[l];
            let input: &[f64] = if l == 0 {
                x
            } else {
                &trace.activations[l - 1]
            };
            for o in 0..layer.out_dim {
                grad_b[l][o] += delta[o];
                let row = &mut grad_w[l][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += delta[o] * a;
                }
            }
            if l > 0 {
                let mut d_input = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (di, w) in d_input.iter_mut().zip(row) {
                        *di += w * delta[o];
                    }
                }
                let z_prev = &trace.pre_activations[l - 1];
                let act_prev = model.layers[l - 1].activation;
                delta = d_input
                    .iter()
                    .zip(z_prev)
                    .map(|(&d, &z)| d * act_prev.derivative(z))
                    .collect();
            }
        }
    }

    let scale = lr / batch.len() as f64;
    for (l, layer) in model.layers.iter_mut().enumerate() {
        for (w, g) in layer.weight.iter_mut().zip(&grad_w[l]) {
            *w -= scale * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(&grad_b[l]) {
            *b -= scale * g;
        }
    }
    Ok(loss)
}
