//! Single-layer logistic readout trained by per-sample SGD.
//!
//! Outputs are independent sigmoids (no softmax). For one-hot targets `t`,
//! the summed binary cross-entropy has gradient `x ⊗ (σ(Wᵀx) - t)` with
//! respect to `W`, which is exactly the update applied by [`ReadoutModel::sgd_step`].

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{max_level, FeatureVector};

pub const INIT_SCALE: f64 = 0.01;

/// Indexed collection of `(features, label)` pairs.
pub trait Samples {
    fn len(&self) -> usize;

    fn dim(&self) -> usize;

    /// Write sample `i`'s features into `out` (length [`dim`](Samples::dim)).
    fn fill(&self, i: usize, out: &mut [f64]);

    fn label(&self, i: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Quantized features stored as lattice levels, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    bits: u8,
    levels: Vec<u8>,
    labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, bits: u8) -> Self {
        Self {
            dim,
            bits,
            levels: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, fv: &FeatureVector, label: usize) -> Result<()> {
        if fv.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: fv.len(),
            });
        }
        if fv.bits() != self.bits {
            return Err(Error::invalid("bits", format!("{} != {}", fv.bits(), self.bits)));
        }
        self.levels.extend_from_slice(fv.levels());
        self.labels.push(label);
        Ok(())
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self, i: usize) -> &[u8] {
        &self.levels[i * self.dim..(i + 1) * self.dim]
    }
}

impl Samples for FeatureSet {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        let top = max_level(self.bits) as f64;
        for (o, &l) in out.iter_mut().zip(self.levels(i)) {
            *o = l as f64 / top;
        }
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

/// Plain real-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSet {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl DenseSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: rows.len(),
                labels: labels.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { rows, labels })
    }
}

impl Samples for DenseSet {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn fill(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.rows[i]);
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub shuffle: bool,
    pub seed: u64,
    /// Adds a trainable per-class offset. Off by default.
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.02,
            shuffle: true,
            seed: 0,
            bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Mean per-sample loss recorded during each epoch, plus the loss before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub initial_loss: f64,
    pub epoch_loss: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Summed BCE over independent sigmoid outputs against a one-hot target.
pub fn bce(outputs: &[f64], label: usize) -> f64 {
    const EPS: f64 = 1e-15;
    outputs
        .iter()
        .enumerate()
        .map(|(c, &y)| {
            let y = y.clamp(EPS, 1.0 - EPS);
            if c == label {
                -y.ln()
            } else {
                -(1.0 - y).ln()
            }
        })
        .sum()
}

/// `N × C` weight matrix, row-major by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    inputs: usize,
    classes: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl ReadoutModel {
    /// Weights drawn uniformly from `[-0.01, 0.01]` with a seeded generator.
    pub fn init(inputs: usize, classes: usize, seed: u64) -> Result<Self> {
        if inputs == 0 || classes == 0 {
            return Err(Error::Empty("readout shape"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..inputs * classes)
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        Ok(Self {
            inputs,
            classes,
            weights,
            bias: None,
        })
    }

    pub fn zeros(inputs: usize, classes: usize) -> Result<Self> {
        if inputs == 0 || classes == 0 {
            return Err(Error::Empty("readout shape"));
        }
        Ok(Self {
            inputs,
            classes,
            weights: vec![0.0; inputs * classes],
            bias: None,
        })
    }

    pub fn from_weights(inputs: usize, classes: usize, weights: Vec<f64>) -> Result<Self> {
        if inputs == 0 || classes == 0 {
            return Err(Error::Empty("readout shape"));
        }
        if weights.len() != inputs * classes {
            return Err(Error::DimensionMismatch {
                expected: inputs * classes,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", "non-finite value"));
        }
        Ok(Self {
            inputs,
            classes,
            weights,
            bias: None,
        })
    }

    pub fn with_bias(mut self) -> Self {
        self.bias = Some(vec![0.0; self.classes]);
        self
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, c: usize) -> f64 {
        self.weights[i * self.classes + c]
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.classes,
            });
        }
        Ok(())
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.bias {
            Some(b) => out.copy_from_slice(b),
            None => out.fill(0.0),
        }
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.classes)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.logits_into(x, out);
        out.iter_mut().for_each(|z| *z = sigmoid(*z));
    }

    /// Independent per-class sigmoid outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.classes];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        self.check_label(label)?;
        Ok(bce(&self.forward(x)?, label))
    }

    fn apply_update(&mut self, x: &[f64], err: &[f64], lr: f64) {
        for (xi, row) in x.iter().zip(self.weights.chunks_exact_mut(self.classes)) {
            if *xi == 0.0 {
                continue;
            }
            let s = lr * xi;
            for (w, e) in row.iter_mut().zip(err) {
                *w -= s * e;
            }
        }
        if let Some(b) = &mut self.bias {
            for (bc, e) in b.iter_mut().zip(err) {
                *bc -= lr * e;
            }
        }
    }

    /// `W ← W − lr · x ⊗ (forward(x) − onehot(label))`.
    pub fn sgd_step(&mut self, x: &[f64], label: usize, lr: f64) -> Result<()> {
        self.check_label(label)?;
        let mut err = self.forward(x)?;
        err[label] -= 1.0;
        self.apply_update(x, &err, lr);
        Ok(())
    }

    /// Analytic gradient of the summed BCE, laid out like [`weights`](Self::weights).
    pub fn gradient(&self, x: &[f64], label: usize) -> Result<Vec<f64>> {
        self.check_label(label)?;
        let mut err = self.forward(x)?;
        err[label] -= 1.0;
        Ok(x.iter().flat_map(|xi| err.iter().map(move |e| xi * e)).collect())
    }

    /// Lowest class index wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let y = self.forward(x)?;
        Ok(argmax(&y))
    }

    fn check_samples<S: Samples + ?Sized>(&self, data: &S) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if data.dim() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: data.dim(),
            });
        }
        (0..data.len()).try_for_each(|i| self.check_label(data.label(i)))
    }

    pub fn mean_loss<S: Samples + ?Sized>(&self, data: &S) -> Result<f64> {
        self.check_samples(data)?;
        let mut x = vec![0.0; self.inputs];
        let mut y = vec![0.0; self.classes];
        let mut total = 0.0;
        for i in 0..data.len() {
            data.fill(i, &mut x);
            self.forward_into(&x, &mut y);
            total += bce(&y, data.label(i));
        }
        Ok(total / data.len() as f64)
    }

    /// Per-sample SGD for `cfg.epochs` passes; the visiting order is reshuffled each epoch when enabled.
    pub fn train<S: Samples + ?Sized>(&mut self, data: &S, cfg: &TrainConfig) -> Result<TrainTrace> {
        cfg.validate()?;
        self.check_samples(data)?;
        if cfg.bias && self.bias.is_none() {
            self.bias = Some(vec![0.0; self.classes]);
        }
        let initial_loss = self.mean_loss(data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut x = vec![0.0; self.inputs];
        let mut y = vec![0.0; self.classes];
        let mut epoch_loss = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for &i in &order {
                let label = data.label(i);
                data.fill(i, &mut x);
                self.forward_into(&x, &mut y);
                total += bce(&y, label);
                y[label] -= 1.0;
                self.apply_update(&x, &y, cfg.learning_rate);
            }
            epoch_loss.push(total / data.len() as f64);
        }
        Ok(TrainTrace {
            initial_loss,
            epoch_loss,
        })
    }

    /// Fraction of samples whose arg-max output matches the label.
    pub fn evaluate<S: Samples + ?Sized>(&self, data: &S) -> Result<f64> {
        self.check_samples(data)?;
        let mut x = vec![0.0; self.inputs];
        let mut y = vec![0.0; self.classes];
        let mut correct = 0usize;
        for i in 0..data.len() {
            data.fill(i, &mut x);
            // sigmoid is monotone, so logits give the same arg-max
            self.logits_into(&x, &mut y);
            if argmax(&y) == data.label(i) {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }

    /// CSV with a `rows,cols` header line followed by one line per feature.
    /// A bias, when present, is written as a final extra row.
    pub fn to_csv(&self) -> String {
        let rows = self.inputs + usize::from(self.bias.is_some());
        let mut s = format!("{rows},{}\n", self.classes);
        let bias_row = self.bias.iter().map(Vec::as_slice);
        for row in self.weights.chunks_exact(self.classes).chain(bias_row) {
            let line: Vec<String> = row.iter().map(|w| format!("{w:e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Parse [`to_csv`](Self::to_csv) output; every row is read as weights.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Empty("weights file"))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad header `{header}`")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Config(format!("bad header `{header}`")));
        };
        let weights: Vec<f64> = lines
            .flat_map(|l| l.split(','))
            .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad weight `{t}`"))))
            .collect::<Result<_>>()?;
        Self::from_weights(rows, cols, weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = c;
        }
    }
    best
}
