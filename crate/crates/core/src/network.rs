//! One-hidden-layer tanh network with a linear output layer, trained by Adam
//! on (optionally weighted) mean-squared error with patience-based early
//! stopping.
//!
//! Parameters live in one flat vector laid out as
//! `[hidden_weights (H×I), hidden_bias (H), output_weights (K×H), output_bias (K)]`,
//! weight matrices row-major. Gradients use the same layout.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::{EmbeddingSpec, NarxDataset, ScalerStats, Split};
use crate::error::{NarxError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
}

impl Layout {
    pub fn n_params(&self) -> usize {
        self.n_hidden * self.n_inputs + self.n_hidden + self.n_outputs * self.n_hidden + self.n_outputs
    }

    fn offsets(&self) -> [usize; 4] {
        let w1 = 0;
        let b1 = w1 + self.n_hidden * self.n_inputs;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_outputs * self.n_hidden;
        [w1, b1, w2, b2]
    }

    /// Split a flat parameter-shaped slice into `(W1, b1, W2, b2)`.
    pub fn split<'a>(&self, flat: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let [_, b1, w2, b2] = self.offsets();
        let (w1s, rest) = flat.split_at(b1);
        let (b1s, rest) = rest.split_at(w2 - b1);
        let (w2s, b2s) = rest.split_at(b2 - w2);
        (w1s, b1s, w2s, b2s)
    }

    pub fn split_mut<'a>(
        &self,
        flat: &'a mut [f64],
    ) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let [_, b1, w2, b2] = self.offsets();
        let (w1s, rest) = flat.split_at_mut(b1);
        let (b1s, rest) = rest.split_at_mut(w2 - b1);
        let (w2s, b2s) = rest.split_at_mut(b2 - w2);
        (w1s, b1s, w2s, b2s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layout: Layout,
    pub params: Vec<f64>,
    /// Set for models built for a NARX embedding.
    pub embedding: Option<EmbeddingSpec>,
    pub scaler: ScalerStats,
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Result<MlpModel> {
    for (name, v) in [("n_inputs", n_inputs), ("n_hidden", n_hidden), ("n_outputs", n_outputs)] {
        if v == 0 {
            return Err(NarxError::config(name, "must be >= 1"));
        }
    }
    let layout = Layout {
        n_inputs,
        n_hidden,
        n_outputs,
    };
    let mut params = vec![0.0; layout.n_params()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    {
        let (w1, _, w2, _) = layout.split_mut(&mut params);
        let l1 = (6.0 / (n_inputs + n_hidden) as f64).sqrt();
        w1.iter_mut().for_each(|w| *w = rng.random_range(-l1..=l1));
        let l2 = (6.0 / (n_hidden + n_outputs) as f64).sqrt();
        w2.iter_mut().for_each(|w| *w = rng.random_range(-l2..=l2));
    }
    let embedding = n_inputs.is_multiple_of(2).then(|| EmbeddingSpec {
        n_lags: n_inputs / 2,
        n_leads: n_outputs - 1,
    });
    Ok(MlpModel {
        layout,
        params,
        embedding,
        scaler: ScalerStats::identity(),
    })
}

impl MlpModel {
    /// Build from explicit weights. `hidden_weights` is `n_hidden × n_inputs`,
    /// `output_weights` is `n_outputs × n_hidden`.
    pub fn from_parts(
        hidden_weights: &Matrix,
        hidden_bias: &[f64],
        output_weights: &Matrix,
        output_bias: &[f64],
    ) -> Result<Self> {
        let layout = Layout {
            n_inputs: hidden_weights.cols(),
            n_hidden: hidden_weights.rows(),
            n_outputs: output_weights.rows(),
        };
        if hidden_bias.len() != layout.n_hidden
            || output_weights.cols() != layout.n_hidden
            || output_bias.len() != layout.n_outputs
        {
            return Err(NarxError::shape(
                format!("consistent layout {layout:?}"),
                format!(
                    "b1 {}, W2 {}x{}, b2 {}",
                    hidden_bias.len(),
                    output_weights.rows(),
                    output_weights.cols(),
                    output_bias.len()
                ),
            ));
        }
        let mut params = Vec::with_capacity(layout.n_params());
        params.extend_from_slice(hidden_weights.data());
        params.extend_from_slice(hidden_bias);
        params.extend_from_slice(output_weights.data());
        params.extend_from_slice(output_bias);
        let mut model = init_model(layout.n_inputs, layout.n_hidden, layout.n_outputs, 0)?;
        model.params = params;
        model.check_finite()?;
        Ok(model)
    }

    pub fn with_narx(mut self, embedding: EmbeddingSpec, scaler: ScalerStats) -> Result<Self> {
        if embedding.input_width() != self.layout.n_inputs
            || embedding.target_width() != self.layout.n_outputs
        {
            return Err(NarxError::shape(
                format!(
                    "{} inputs / {} outputs",
                    embedding.input_width(),
                    embedding.target_width()
                ),
                format!("{} / {}", self.layout.n_inputs, self.layout.n_outputs),
            ));
        }
        self.embedding = Some(embedding);
        self.scaler = scaler;
        Ok(self)
    }

    pub fn hidden_weights(&self) -> &[f64] {
        self.layout.split(&self.params).0
    }

    pub fn hidden_bias(&self) -> &[f64] {
        self.layout.split(&self.params).1
    }

    pub fn output_weights(&self) -> &[f64] {
        self.layout.split(&self.params).2
    }

    pub fn output_bias(&self) -> &[f64] {
        self.layout.split(&self.params).3
    }

    fn check_finite(&self) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(NarxError::Data("model parameters must be finite".into()))
        }
    }

    /// Forward pass for one row. `hidden` is scratch of length `n_hidden`.
    #[inline]
    pub fn forward_row(&self, input: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (w1, b1, w2, b2) = self.layout.split(&self.params);
        forward_row_raw(self.layout, w1, b1, w2, b2, input, hidden, out);
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn forward_row_raw(
    layout: Layout,
    w1: &[f64],
    b1: &[f64],
    w2: &[f64],
    b2: &[f64],
    input: &[f64],
    hidden: &mut [f64],
    out: &mut [f64],
) {
    let ni = layout.n_inputs;
    for ((h, wrow), b) in hidden.iter_mut().zip(w1.chunks_exact(ni)).zip(b1) {
        *h = (dot(wrow, input) + b).tanh();
    }
    for ((o, wrow), b) in out.iter_mut().zip(w2.chunks_exact(layout.n_hidden)).zip(b2) {
        *o = dot(wrow, hidden) + b;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; summation order is fixed so results are reproducible.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn forward(model: &MlpModel, inputs: &Matrix) -> Result<Matrix> {
    if inputs.cols() != model.layout.n_inputs {
        return Err(NarxError::shape(
            format!("{} input columns", model.layout.n_inputs),
            format!("{} columns", inputs.cols()),
        ));
    }
    let mut out = Matrix::zeros(inputs.rows(), model.layout.n_outputs);
    let mut hidden = vec![0.0; model.layout.n_hidden];
    for r in 0..inputs.rows() {
        model.forward_row(inputs.row(r), &mut hidden, out.row_mut(r));
    }
    Ok(out)
}

/// Per-output weights of the squared-error loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossWeights {
    /// Plain mean over all samples and outputs.
    #[default]
    Uniform,
    /// `Σ_k a_k · MSE_k` with `Σa = 1`, `a_1 > a_2 = a_3 = …`.
    Weighted(Vec<f64>),
}

impl LossWeights {
    /// Weights with `first` on the primary output and the remainder shared evenly.
    pub fn primary(first: f64, n_outputs: usize) -> Result<Self> {
        let mut a = vec![first];
        if n_outputs > 1 {
            let rest = (1.0 - first) / (n_outputs - 1) as f64;
            a.extend(std::iter::repeat_n(rest, n_outputs - 1));
        }
        let w = LossWeights::Weighted(a);
        w.validate(n_outputs)?;
        Ok(w)
    }

    pub fn validate(&self, n_outputs: usize) -> Result<()> {
        let LossWeights::Weighted(a) = self else {
            return Ok(());
        };
        let field = "train.loss_weights";
        if a.len() != n_outputs {
            return Err(NarxError::config(
                field,
                format!("{} weights for {n_outputs} outputs", a.len()),
            ));
        }
        if a.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(NarxError::config(field, "weights must be finite and >= 0"));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(NarxError::config(field, format!("weights sum to {sum}, not 1")));
        }
        if a.len() > 1 {
            if a[0] <= a[1] {
                return Err(NarxError::config(field, "first weight must exceed the others"));
            }
            if a[1..].iter().any(|w| (w - a[1]).abs() > 1e-12) {
                return Err(NarxError::config(field, "auxiliary weights must be equal"));
            }
        }
        Ok(())
    }

    /// Length check only; `mse_loss` and `backward` accept any weight
    /// vector, training additionally enforces [`LossWeights::validate`].
    fn check_len(&self, n_outputs: usize) -> Result<()> {
        match self {
            LossWeights::Weighted(a) if a.len() != n_outputs => Err(NarxError::config(
                "train.loss_weights",
                format!("{} weights for {n_outputs} outputs", a.len()),
            )),
            _ => Ok(()),
        }
    }

    fn resolve(&self, n_outputs: usize) -> Vec<f64> {
        match self {
            LossWeights::Uniform => vec![1.0 / n_outputs as f64; n_outputs],
            LossWeights::Weighted(a) => a.clone(),
        }
    }
}

pub fn mse_loss(pred: &Matrix, target: &Matrix, weights: &LossWeights) -> Result<f64> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(NarxError::shape(
            format!("{}x{}", target.rows(), target.cols()),
            format!("{}x{}", pred.rows(), pred.cols()),
        ));
    }
    if pred.rows() == 0 {
        return Err(NarxError::Data("loss over an empty batch".into()));
    }
    match weights {
        LossWeights::Uniform => {
            let sse: f64 = pred
                .data()
                .iter()
                .zip(target.data())
                .map(|(p, t)| (p - t) * (p - t))
                .sum();
            Ok(sse / pred.data().len() as f64)
        }
        LossWeights::Weighted(a) => {
            weights.check_len(pred.cols())?;
            let mut per_output = vec![0.0; pred.cols()];
            for r in 0..pred.rows() {
                for ((acc, p), t) in per_output.iter_mut().zip(pred.row(r)).zip(target.row(r)) {
                    *acc += (p - t) * (p - t);
                }
            }
            let n = pred.rows() as f64;
            Ok(per_output.iter().zip(a).map(|(s, w)| w * s / n).sum())
        }
    }
}

/// Reusable buffers for the forward/backward pass.
struct Workspace {
    hidden: Vec<f64>,
    out: Vec<f64>,
    d_out: Vec<f64>,
    d_hidden: Vec<f64>,
}

impl Workspace {
    fn new(layout: Layout) -> Self {
        Self {
            hidden: vec![0.0; layout.n_hidden],
            out: vec![0.0; layout.n_outputs],
            d_out: vec![0.0; layout.n_outputs],
            d_hidden: vec![0.0; layout.n_hidden],
        }
    }

    /// Loss over `rows` (all rows when `None`) and its gradient, written into `grads`.
    fn loss_and_grad(
        &mut self,
        layout: Layout,
        params: &[f64],
        inputs: &Matrix,
        targets: &Matrix,
        rows: Option<&[usize]>,
        output_weights: &[f64],
        grads: &mut [f64],
    ) -> f64 {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let (w1, b1, w2, b2) = layout.split(params);
        let (gw1, gb1, gw2, gb2) = layout.split_mut(grads);
        let n = rows.map_or(inputs.rows(), <[usize]>::len);
        let scale = 2.0 / n as f64;
        let (nh, ni) = (layout.n_hidden, layout.n_inputs);
        let mut loss = 0.0;
        for i in 0..n {
            let r = rows.map_or(i, |rs| rs[i]);
            let x = inputs.row(r);
            let t = targets.row(r);
            forward_row_raw(layout, w1, b1, w2, b2, x, &mut self.hidden, &mut self.out);
            for k in 0..layout.n_outputs {
                let e = self.out[k] - t[k];
                loss += output_weights[k] * e * e;
                self.d_out[k] = scale * output_weights[k] * e;
            }
            self.d_hidden.iter_mut().for_each(|d| *d = 0.0);
            for (k, &dk) in self.d_out.iter().enumerate() {
                axpy(dk, &self.hidden, &mut gw2[k * nh..(k + 1) * nh]);
                gb2[k] += dk;
                axpy(dk, &w2[k * nh..(k + 1) * nh], &mut self.d_hidden);
            }
            for h in 0..nh {
                let a = self.hidden[h];
                let dz = self.d_hidden[h] * (1.0 - a * a);
                gb1[h] += dz;
                axpy(dz, x, &mut gw1[h * ni..(h + 1) * ni]);
            }
        }
        loss / n as f64
    }
}

/// Exact gradient of `mse_loss` with respect to every parameter, in the flat layout.
pub fn backward(
    model: &MlpModel,
    inputs: &Matrix,
    targets: &Matrix,
    weights: &LossWeights,
) -> Result<Vec<f64>> {
    let layout = model.layout;
    if inputs.cols() != layout.n_inputs || targets.cols() != layout.n_outputs {
        return Err(NarxError::shape(
            format!("{} inputs / {} targets", layout.n_inputs, layout.n_outputs),
            format!("{} / {}", inputs.cols(), targets.cols()),
        ));
    }
    if inputs.rows() != targets.rows() || inputs.rows() == 0 {
        return Err(NarxError::shape(
            format!("{} non-empty target rows", inputs.rows()),
            targets.rows(),
        ));
    }
    weights.check_len(layout.n_outputs)?;
    let a = weights.resolve(layout.n_outputs);
    let mut grads = vec![0.0; layout.n_params()];
    Workspace::new(layout).loss_and_grad(layout, &model.params, inputs, targets, None, &a, &mut grads);
    Ok(grads)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    #[default]
    FullBatch,
    MiniBatch { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_mode: BatchMode,
    pub rng_seed: u64,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_epochs: 5000,
            patience: 100,
            batch_mode: BatchMode::FullBatch,
            rng_seed: 0,
            loss_weights: LossWeights::Uniform,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NarxError::config("train.learning_rate", "must be > 0"));
        }
        for (name, b) in [("train.adam_beta1", self.adam_beta1), ("train.adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(NarxError::config(name, "must lie in [0, 1)"));
            }
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return Err(NarxError::config("train.adam_epsilon", "must be > 0"));
        }
        if self.max_epochs == 0 {
            return Err(NarxError::config("train.max_epochs", "must be >= 1"));
        }
        if let BatchMode::MiniBatch { size: 0 } = self.batch_mode {
            return Err(NarxError::config("train.batch_mode.size", "must be >= 1"));
        }
        Ok(())
    }
}

/// First and second moment estimates; `t` counts completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place. Advances `state.t` first.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) {
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = state.t as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Loss of the training rows, one entry per epoch.
    pub train_loss: Vec<f64>,
    /// Uniform MSE over all outputs on the validation rows after each epoch.
    pub val_loss: Vec<f64>,
    /// 1-based epoch of the returned snapshot.
    pub best_epoch: usize,
    /// 1-based epoch at which training ended.
    pub stopped_epoch: usize,
}

impl TrainTrace {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            epochs: self.val_loss.len(),
            best_epoch: self.best_epoch,
            stopped_epoch: self.stopped_epoch,
            best_val_loss: self.best_val_loss(),
            final_train_loss: *self.train_loss.last().unwrap_or(&f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub n_hidden: usize,
    pub embedding: EmbeddingSpec,
}

/// Train on the dataset's training rows and return the best-validation snapshot.
///
/// An epoch is one Adam step over the full training block (or one pass of
/// shuffled minibatches). Training stops once the validation loss has gone
/// `max(patience, 1)` consecutive epochs without improving, or at `max_epochs`.
pub fn train(
    dataset: &NarxDataset,
    arch: &Architecture,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainTrace)> {
    config.validate()?;
    if arch.embedding != dataset.embedding {
        return Err(NarxError::config(
            "architecture.embedding",
            format!(
                "{:?} does not match the dataset's {:?}",
                arch.embedding, dataset.embedding
            ),
        ));
    }
    let scaler = dataset
        .scaler
        .ok_or_else(|| NarxError::Data("dataset must be scaled before training".into()))?;
    let (train_x, train_y) = dataset.split_rows(Split::Train)?;
    let (val_x, val_y) = dataset.split_rows(Split::Validation)?;
    if train_x.rows() == 0 || val_x.rows() == 0 {
        return Err(NarxError::Data("empty training or validation block".into()));
    }
    let emb = arch.embedding;
    let mut model = init_model(emb.input_width(), arch.n_hidden, emb.target_width(), config.rng_seed)?
        .with_narx(emb, scaler)?;
    config.loss_weights.validate(model.layout.n_outputs)?;
    let out_weights = config.loss_weights.resolve(model.layout.n_outputs);

    let layout = model.layout;
    let mut ws = Workspace::new(layout);
    let mut grads = vec![0.0; layout.n_params()];
    let mut adam = AdamState::new(layout.n_params());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_x.rows()).collect();

    let mut best_params = model.params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut trace = TrainTrace {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
    };
    let mut val_pred = Matrix::zeros(val_x.rows(), layout.n_outputs);
    let wait = config.patience.max(1);

    for epoch in 1..=config.max_epochs {
        let train_loss = match config.batch_mode {
            BatchMode::FullBatch => {
                let l = ws.loss_and_grad(layout, &model.params, &train_x, &train_y, None, &out_weights, &mut grads);
                adam_step(&mut model.params, &grads, &mut adam, config);
                l
            }
            BatchMode::MiniBatch { size } => {
                order.shuffle(&mut shuffle_rng);
                let mut total = 0.0;
                for chunk in order.chunks(size) {
                    let l = ws.loss_and_grad(
                        layout,
                        &model.params,
                        &train_x,
                        &train_y,
                        Some(chunk),
                        &out_weights,
                        &mut grads,
                    );
                    total += l * chunk.len() as f64;
                    adam_step(&mut model.params, &grads, &mut adam, config);
                }
                total / order.len() as f64
            }
        };
        for r in 0..val_x.rows() {
            model.forward_row(val_x.row(r), &mut ws.hidden, val_pred.row_mut(r));
        }
        let val_loss = mse_loss(&val_pred, &val_y, &LossWeights::Uniform)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(NarxError::Divergence {
                stage: "training".into(),
                step: epoch,
            });
        }
        trace.train_loss.push(train_loss);
        trace.val_loss.push(val_loss);
        trace.stopped_epoch = epoch;
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&model.params);
        } else if epoch - best_epoch >= wait {
            break;
        }
    }
    trace.best_epoch = best_epoch;
    model.params = best_params;
    Ok((model, trace))
}

/// On-disk JSON form of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    pub hidden_activation: String,
    pub output_activation: String,
    pub embedding: Option<EmbeddingSpec>,
    pub scaler: ScalerStats,
    /// Row-major `n_hidden × n_inputs`.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// Row-major `n_outputs × n_hidden`.
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub train_config: Option<TrainConfig>,
    pub trace: Option<TraceSummary>,
}

impl MlpModel {
    pub fn to_document(&self, config: Option<&TrainConfig>, trace: Option<&TrainTrace>) -> ModelDocument {
        let l = self.layout;
        ModelDocument {
            n_inputs: l.n_inputs,
            n_hidden: l.n_hidden,
            n_outputs: l.n_outputs,
            hidden_activation: "tanh".into(),
            output_activation: "identity".into(),
            embedding: self.embedding,
            scaler: self.scaler,
            hidden_weights: self.hidden_weights().to_vec(),
            hidden_bias: self.hidden_bias().to_vec(),
            output_weights: self.output_weights().to_vec(),
            output_bias: self.output_bias().to_vec(),
            train_config: config.cloned(),
            trace: trace.map(TrainTrace::summary),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.hidden_activation != "tanh" || doc.output_activation != "identity" {
            return Err(NarxError::config(
                "model.activation",
                "only tanh hidden / identity output is supported",
            ));
        }
        if doc.hidden_weights.len() != doc.n_hidden * doc.n_inputs
            || doc.output_weights.len() != doc.n_outputs * doc.n_hidden
        {
            return Err(NarxError::shape("weights matching declared sizes", "mismatched arrays"));
        }
        let w1 = Matrix::from_vec(doc.n_hidden, doc.n_inputs, doc.hidden_weights.clone());
        let w2 = Matrix::from_vec(doc.n_outputs, doc.n_hidden, doc.output_weights.clone());
        let mut model = MlpModel::from_parts(&w1, &doc.hidden_bias, &w2, &doc.output_bias)?;
        model.scaler = doc.scaler;
        model.embedding = doc.embedding;
        if let Some(e) = doc.embedding {
            model = model.with_narx(e, doc.scaler)?;
        }
        Ok(model)
    }

    pub fn write_json(
        &self,
        path: impl AsRef<Path>,
        config: Option<&TrainConfig>,
        trace: Option<&TrainTrace>,
    ) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_document(config, trace))?;
        std::fs::write(path, text).map_err(|e| NarxError::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| NarxError::io(path, e))?;
        Self::from_document(&serde_json::from_str(&text)?)
    }
}
