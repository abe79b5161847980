//! Desk-scale feedforward trainer.
//!
//! A deliberately small, dependency-free MLP (ReLU hidden layers, softmax
//! cross-entropy output) trained with minibatch SGD or Adam. Training is
//! fully deterministic given the seeds, emits weight snapshots plus metric
//! traces every quarter epoch, and treats optimizer divergence as data
//! rather than as a failure.

mod data;
mod init;
pub mod experiments;

pub use data::SyntheticDataset;
pub use init::{init_weights, InitScheme};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::diagram::EssentialPolicy;
use crate::earlystop::{Direction, MetricTrace};
use crate::error::{Error, Result};
use crate::layer::{NetworkSnapshot, WeightedBipartiteLayer};
use crate::measures::mean_normalized_neural_persistence;

/// Architecture: the full list of layer widths (input, hidden..., output).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("architecture needs at least input and output sizes"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(Self { layer_sizes })
    }

    /// Input size and output size taken from the dataset, hidden widths in
    /// between.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("at least two sizes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    /// Adam with the usual defaults (0.9, 0.999, 1e-8).
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    /// Emit snapshots and trace samples every this many quarter-epochs.
    pub snapshot_interval: u32,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn sgd(learning_rate: f64, epochs: u32, seed: u64) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size: 32,
            seed,
            snapshot_interval: 1,
            optimizer: Optimizer::Sgd,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.snapshot_interval == 0 {
            return Err(Error::invalid("snapshot interval must be at least 1"));
        }
        Ok(())
    }
}

/// Metric samples on the shared quarter-epoch step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub steps: Vec<u64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub np_mean_normalized: Vec<f64>,
    pub weight_pnorm: Vec<f64>,
}

impl TraceSet {
    fn push(&mut self, step: u64, m: &EvalMetrics) {
        self.steps.push(step);
        self.train_loss.push(m.train_loss);
        self.val_loss.push(m.val_loss);
        self.val_accuracy.push(m.val_accuracy);
        self.test_accuracy.push(m.test_accuracy);
        self.np_mean_normalized.push(m.np_mean_normalized);
        self.weight_pnorm.push(m.weight_pnorm);
    }

    fn to_trace(&self, values: &[f64], direction: Direction) -> MetricTrace {
        let samples = self.steps.iter().cloned().zip(values.iter().cloned()).collect();
        MetricTrace::new(samples, direction).expect("trace set is well-formed")
    }

    pub fn np_trace(&self) -> MetricTrace {
        self.to_trace(&self.np_mean_normalized, Direction::Maximize)
    }

    pub fn val_loss_trace(&self) -> MetricTrace {
        self.to_trace(&self.val_loss, Direction::Minimize)
    }

    pub fn test_accuracy_trace(&self) -> MetricTrace {
        self.to_trace(&self.test_accuracy, Direction::Maximize)
    }

    pub fn train_loss_trace(&self) -> MetricTrace {
        self.to_trace(&self.train_loss, Direction::Minimize)
    }

    pub fn weight_pnorm_trace(&self) -> MetricTrace {
        self.to_trace(&self.weight_pnorm, Direction::Maximize)
    }
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub snapshots: Vec<NetworkSnapshot>,
    pub traces: TraceSet,
    /// Set when an update produced non-finite weights; the offending step
    /// was rolled back and parameters frozen from there on.
    pub diverged: bool,
}

struct EvalMetrics {
    train_loss: f64,
    val_loss: f64,
    val_accuracy: f64,
    test_accuracy: f64,
    np_mean_normalized: f64,
    weight_pnorm: f64,
}

/// Row-major out x in weight matrix plus bias.
#[derive(Debug, Clone)]
struct LayerParams {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Mlp {
    layers: Vec<LayerParams>,
}

impl Mlp {
    pub(crate) fn init(spec: &MlpSpec, scheme: InitScheme, seed: u64) -> Result<Self> {
        let snapshot = init_weights(spec, scheme, seed)?;
        let layers = snapshot
            .layers()
            .iter()
            .map(|l| LayerParams {
                rows: l.out_count(),
                cols: l.in_count(),
                weights: l.dense_weights().expect("init layers are dense").to_vec(),
                bias: vec![0.0; l.out_count()],
            })
            .collect();
        Ok(Self { layers })
    }

    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        // Returns the activation of every layer, input included; the last
        // entry holds the raw logits.
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (idx, layer) in self.layers.iter().enumerate() {
            let prev = activations.last().expect("non-empty");
            let mut z = layer.bias.clone();
            for (r, out) in z.iter_mut().enumerate() {
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let mut acc = 0.0;
                for (w, x) in row.iter().zip(prev) {
                    acc += w * x;
                }
                *out += acc;
            }
            if idx + 1 < self.layers.len() {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activations.push(z);
        }
        activations
    }

    fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input).pop().expect("non-empty")
    }

    /// Accumulate cross-entropy gradients for one sample; returns the loss.
    fn backward(&self, input: &[f64], label: usize, grads: &mut [LayerGrads]) -> f64 {
        let activations = self.forward(input);
        let logits = activations.last().expect("non-empty");
        let (loss, mut delta) = softmax_cross_entropy(logits, label);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let below = &activations[idx];
            let grad = &mut grads[idx];
            for (r, &d) in delta.iter().enumerate() {
                grad.bias[r] += d;
                let row = &mut grad.weights[r * layer.cols..(r + 1) * layer.cols];
                for (g, x) in row.iter_mut().zip(below) {
                    *g += d * x;
                }
            }
            if idx > 0 {
                let mut next = vec![0.0; layer.cols];
                for (r, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                // ReLU gate of the layer below.
                for (n, a) in next.iter_mut().zip(below) {
                    if *a <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        loss
    }

    fn snapshot(&self, step: u64) -> NetworkSnapshot {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                WeightedBipartiteLayer::dense(l.rows, l.cols, l.weights.clone())
                    .expect("trainer keeps weights finite")
            })
            .collect();
        NetworkSnapshot::new(step, layers).expect("at least one layer")
    }

    /// Parameters a run is allowed to keep: finite and small enough that a
    /// desk-scale forward pass cannot overflow to NaN.
    fn weights_within(&self, cap: f64) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|w| w.abs() <= cap))
    }

    fn weight_pnorm(&self, p: f64) -> f64 {
        let sum: f64 = self
            .layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| crate::measures::pow_p(w.abs(), p))
            .sum();
        crate::measures::root_p(sum, p)
    }
}

#[derive(Debug, Clone)]
struct LayerGrads {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LayerGrads {
    fn zeros_like(layer: &LayerParams) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    fn reset(&mut self) {
        self.weights.iter_mut().for_each(|g| *g = 0.0);
        self.bias.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Numerically stable softmax cross-entropy; returns (loss, dLoss/dLogits).
fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut delta: Vec<f64> = exp.iter().map(|e| e / sum).collect();
    delta[label] -= 1.0;
    (loss, delta)
}

struct AdamState {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    t: u64,
}

/// Updates that push any parameter past this magnitude are rolled back and
/// the run is frozen and flagged as diverged.
const DIVERGENCE_CAP: f64 = 1e30;

/// Train the network and sample metrics plus snapshots on the quarter-epoch
/// grid (step 0 holds the initial state). Divergent updates are rolled back
/// and recorded instead of aborting the run.
pub fn train(spec: &MlpSpec, dataset: &SyntheticDataset, config: &TrainConfig) -> Result<TrainOutput> {
    train_from(Mlp::init(spec, InitScheme::Xavier, config.seed)?, spec, dataset, config)
}

/// Train starting from an explicit initialization scheme.
pub fn train_with_init(
    spec: &MlpSpec,
    dataset: &SyntheticDataset,
    config: &TrainConfig,
    scheme: InitScheme,
) -> Result<TrainOutput> {
    train_from(Mlp::init(spec, scheme, config.seed)?, spec, dataset, config)
}

fn train_from(
    mut mlp: Mlp,
    spec: &MlpSpec,
    dataset: &SyntheticDataset,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    if spec.input_size() != dataset.n_features() {
        return Err(Error::invalid(format!(
            "architecture expects {} inputs but the dataset has {} features",
            spec.input_size(),
            dataset.n_features()
        )));
    }
    if spec.output_size() != dataset.n_classes() {
        return Err(Error::invalid(format!(
            "architecture expects {} classes but the dataset has {}",
            spec.output_size(),
            dataset.n_classes()
        )));
    }

    let mut rng = StdRng::seed_from_u64(config.seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut grads: Vec<LayerGrads> = mlp.layers.iter().map(LayerGrads::zeros_like).collect();
    let mut adam = AdamState {
        m: mlp.layers.iter().map(LayerGrads::zeros_like).collect(),
        v: mlp.layers.iter().map(LayerGrads::zeros_like).collect(),
        t: 0,
    };

    let mut snapshots = Vec::new();
    let mut traces = TraceSet {
        steps: Vec::new(),
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        test_accuracy: Vec::new(),
        np_mean_normalized: Vec::new(),
        weight_pnorm: Vec::new(),
    };
    let mut diverged = false;
    let mut frozen = false;

    let record = |mlp: &Mlp,
                  step: u64,
                  snapshots: &mut Vec<NetworkSnapshot>,
                  traces: &mut TraceSet,
                  diverged: &mut bool| {
        let snapshot = mlp.snapshot(step);
        let mut metrics = evaluate(mlp, &snapshot, dataset);
        // Metrics of a blown-up run can overflow even with finite weights;
        // carry the previous sample so traces stay well-formed.
        for (value, series) in [
            (&mut metrics.train_loss, &traces.train_loss),
            (&mut metrics.val_loss, &traces.val_loss),
            (&mut metrics.val_accuracy, &traces.val_accuracy),
            (&mut metrics.test_accuracy, &traces.test_accuracy),
            (&mut metrics.np_mean_normalized, &traces.np_mean_normalized),
            (&mut metrics.weight_pnorm, &traces.weight_pnorm),
        ] {
            if !value.is_finite() {
                *diverged = true;
                *value = series.last().copied().unwrap_or(0.0);
            }
        }
        traces.push(step, &metrics);
        snapshots.push(snapshot);
    };
    record(&mlp, 0, &mut snapshots, &mut traces, &mut diverged);

    let train_range: Vec<usize> = dataset.train_indices().collect();
    let batches_per_epoch = train_range.len().div_ceil(config.batch_size).max(1);

    for epoch in 0..config.epochs as u64 {
        let mut order = train_range.clone();
        order.shuffle(&mut rng);
        let mut processed_batches = 0usize;
        for quarter in 0..4u64 {
            let batch_target = (batches_per_epoch * (quarter as usize + 1)).div_ceil(4);
            while processed_batches < batch_target {
                let start = processed_batches * config.batch_size;
                let end = (start + config.batch_size).min(order.len());
                if start < end && !frozen {
                    let before = mlp.layers.clone();
                    step_batch(&mut mlp, &order[start..end], dataset, config, &mut grads, &mut adam);
                    if !mlp.weights_within(DIVERGENCE_CAP) {
                        mlp.layers = before;
                        diverged = true;
                        frozen = true;
                    }
                }
                processed_batches += 1;
            }
            let step = epoch * 4 + quarter + 1;
            if step % config.snapshot_interval as u64 == 0 {
                record(&mlp, step, &mut snapshots, &mut traces, &mut diverged);
            }
        }
    }

    Ok(TrainOutput { snapshots, traces, diverged })
}

fn step_batch(
    mlp: &mut Mlp,
    batch: &[usize],
    dataset: &SyntheticDataset,
    config: &TrainConfig,
    grads: &mut [LayerGrads],
    adam: &mut AdamState,
) {
    for g in grads.iter_mut() {
        g.reset();
    }
    for &i in batch {
        mlp.backward(dataset.feature(i), dataset.label(i), grads);
    }
    let scale = 1.0 / batch.len() as f64;
    match config.optimizer {
        Optimizer::Sgd => {
            for (layer, grad) in mlp.layers.iter_mut().zip(grads.iter()) {
                for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                    *w -= config.learning_rate * g * scale;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                    *b -= config.learning_rate * g * scale;
                }
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            adam.t += 1;
            let bc1 = 1.0 - beta1.powi(adam.t as i32);
            let bc2 = 1.0 - beta2.powi(adam.t as i32);
            for (idx, (layer, grad)) in mlp.layers.iter_mut().zip(grads.iter()).enumerate() {
                let (m, v) = (&mut adam.m[idx], &mut adam.v[idx]);
                for j in 0..layer.weights.len() {
                    let g = grad.weights[j] * scale;
                    m.weights[j] = beta1 * m.weights[j] + (1.0 - beta1) * g;
                    v.weights[j] = beta2 * v.weights[j] + (1.0 - beta2) * g * g;
                    layer.weights[j] -= config.learning_rate * (m.weights[j] / bc1)
                        / ((v.weights[j] / bc2).sqrt() + epsilon);
                }
                for j in 0..layer.bias.len() {
                    let g = grad.bias[j] * scale;
                    m.bias[j] = beta1 * m.bias[j] + (1.0 - beta1) * g;
                    v.bias[j] = beta2 * v.bias[j] + (1.0 - beta2) * g * g;
                    layer.bias[j] -=
                        config.learning_rate * (m.bias[j] / bc1) / ((v.bias[j] / bc2).sqrt() + epsilon);
                }
            }
        }
    }
}

fn evaluate(mlp: &Mlp, snapshot: &NetworkSnapshot, dataset: &SyntheticDataset) -> EvalMetrics {
    let split_metrics = |range: std::ops::Range<usize>| -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        let count = range.len().max(1);
        for i in range {
            let logits = mlp.logits(dataset.feature(i));
            let label = dataset.label(i);
            loss += softmax_cross_entropy(&logits, label).0;
            let pred = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("non-empty logits");
            correct += usize::from(pred == label);
        }
        (loss / count as f64, correct as f64 / count as f64)
    };
    let (train_loss, _) = split_metrics(dataset.train_indices());
    let (val_loss, val_accuracy) = split_metrics(dataset.val_indices());
    let (_, test_accuracy) = split_metrics(dataset.test_indices());
    let np_mean_normalized =
        mean_normalized_neural_persistence(snapshot, 2.0, EssentialPolicy::Skip).unwrap_or(0.0);
    EvalMetrics {
        train_loss,
        val_loss,
        val_accuracy,
        test_accuracy,
        np_mean_normalized,
        weight_pnorm: mlp.weight_pnorm(2.0),
    }
}
