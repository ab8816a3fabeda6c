// SPDX-License-Identifier: Apache-2.0

//! Teacher-forced cross-entropy, backpropagation through time, and plain
//! per-pair gradient descent with global-norm clipping.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gru::{step_backward, step_cached, GruCellParams, StepCache};
use super::matrix::Matrix;
use super::model::{
    decode_greedy, encoder_forward, log_probs, GruModel, DECODER_NAMES, ENCODER_NAMES,
};
use super::{Seq2SeqError, BOS, CLIP_NORM, DEFAULT_LEARNING_RATE, EOS};

/// Encoded training example. `target` holds description ids only; `BOS`
/// and `EOS` are added during training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Matrix,
    pub encoder: GruCellParams,
    pub decoder: GruCellParams,
    pub output_proj: Matrix,
}

impl Gradients {
    pub fn zeros_like(model: &GruModel) -> Gradients {
        Gradients {
            embedding: Matrix::zeros(model.embedding.rows, model.embedding.cols),
            encoder: GruCellParams::zeros(model.input_dim, model.hidden_dim),
            decoder: GruCellParams::zeros(model.input_dim, model.hidden_dim),
            output_proj: Matrix::zeros(model.output_proj.rows, model.output_proj.cols),
        }
    }

    /// Same order and names as [`GruModel::tensors`].
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![("embedding", &self.embedding)];
        out.extend(ENCODER_NAMES.iter().copied().zip(self.encoder.matrices()));
        out.extend(DECODER_NAMES.iter().copied().zip(self.decoder.matrices()));
        out.push(("output_proj", &self.output_proj));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = vec![("embedding", &mut self.embedding)];
        out.extend(
            ENCODER_NAMES
                .iter()
                .copied()
                .zip(self.encoder.matrices_mut()),
        );
        out.extend(
            DECODER_NAMES
                .iter()
                .copied()
                .zip(self.decoder.matrices_mut()),
        );
        out.push(("output_proj", &mut self.output_proj));
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, m)| m.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`.
    pub fn clip(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm {
            let s = max_norm / norm;
            for (_, m) in self.tensors_mut() {
                m.scale(s);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Summed cross-entropy over target symbols, `EOS` included.
    pub total: f64,
    pub symbols: usize,
}

impl LossReport {
    pub fn mean(&self) -> f64 {
        self.total / self.symbols as f64
    }
}

struct Forward {
    enc: Vec<StepCache>,
    dec: Vec<StepCache>,
    /// Softmax probabilities per decoder step.
    probs: Vec<Vec<f64>>,
    dec_inputs: Vec<usize>,
    dec_outputs: Vec<usize>,
    loss: LossReport,
}

fn forward(model: &GruModel, pair: &TrainPair) -> Result<Forward, Seq2SeqError> {
    if pair.source.is_empty() {
        return Err(Seq2SeqError::Argument("empty source sequence".into()));
    }
    model.check_ids(&pair.source)?;
    model.check_ids(&pair.target)?;

    let mut enc = Vec::with_capacity(pair.source.len());
    let mut h = vec![0.0; model.hidden_dim];
    for &id in &pair.source {
        let c = step_cached(&model.encoder, model.embedding.row(id), &h);
        h = c.h.clone();
        enc.push(c);
    }

    let dec_inputs: Vec<usize> = std::iter::once(BOS)
        .chain(pair.target.iter().copied())
        .collect();
    let dec_outputs: Vec<usize> = pair
        .target
        .iter()
        .copied()
        .chain(std::iter::once(EOS))
        .collect();
    let mut dec = Vec::with_capacity(dec_inputs.len());
    let mut probs = Vec::with_capacity(dec_inputs.len());
    let mut total = 0.0;
    for (&inp, &out) in dec_inputs.iter().zip(&dec_outputs) {
        let c = step_cached(&model.decoder, model.embedding.row(inp), &h);
        h = c.h.clone();
        let lp = log_probs(model, &h);
        total -= lp[out];
        probs.push(lp.iter().map(|v| v.exp()).collect());
        dec.push(c);
    }
    Ok(Forward {
        enc,
        dec,
        probs,
        dec_inputs,
        loss: LossReport {
            total,
            symbols: dec_outputs.len(),
        },
        dec_outputs,
    })
}

/// Per-symbol mean loss of one pair (forward pass only).
pub fn pair_loss(model: &GruModel, pair: &TrainPair) -> Result<LossReport, Seq2SeqError> {
    forward(model, pair).map(|f| f.loss)
}

/// Loss and the gradient of the per-symbol mean loss for one pair.
pub fn loss_and_gradients(
    model: &GruModel,
    pair: &TrainPair,
) -> Result<(LossReport, Gradients), Seq2SeqError> {
    let fw = forward(model, pair)?;
    let mut grad = Gradients::zeros_like(model);
    let scale = 1.0 / fw.loss.symbols as f64;
    let mut dx = vec![0.0; model.input_dim];

    let mut dh = vec![0.0; model.hidden_dim];
    for t in (0..fw.dec.len()).rev() {
        let mut dlogits = fw.probs[t].clone();
        dlogits[fw.dec_outputs[t]] -= 1.0;
        dlogits.iter_mut().for_each(|v| *v *= scale);
        let c = &fw.dec[t];
        grad.output_proj.add_outer(&dlogits, &c.h);
        model.output_proj.matvec_t_add(&dlogits, &mut dh);

        dx.iter_mut().for_each(|v| *v = 0.0);
        dh = step_backward(&model.decoder, c, &dh, &mut grad.decoder, &mut dx);
        super::matrix::axpy(1.0, &dx, grad.embedding.row_mut(fw.dec_inputs[t]));
    }
    for t in (0..fw.enc.len()).rev() {
        dx.iter_mut().for_each(|v| *v = 0.0);
        dh = step_backward(&model.encoder, &fw.enc[t], &dh, &mut grad.encoder, &mut dx);
        super::matrix::axpy(1.0, &dx, grad.embedding.row_mut(pair.source[t]));
    }
    Ok((fw.loss, grad))
}

/// Per-symbol mean cross-entropy over all pairs.
pub fn evaluate_loss(model: &GruModel, pairs: &[TrainPair]) -> Result<f64, Seq2SeqError> {
    let mut total = 0.0;
    let mut symbols = 0;
    for p in pairs {
        let l = pair_loss(model, p)?;
        total += l.total;
        symbols += l.symbols;
    }
    Ok(total / symbols as f64)
}

/// Fraction of pairs whose greedy decode reproduces the target exactly.
pub fn exact_match_rate(model: &GruModel, pairs: &[TrainPair]) -> Result<f64, Seq2SeqError> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for p in pairs {
        let ctx = encoder_forward(model, &p.source)?;
        if decode_greedy(model, &ctx, p.target.len() + 8) == p.target {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Halve the learning rate when the epoch loss improved by less than
    /// `stall_threshold` (relative) over the last `stall_window` epochs.
    pub decay_on_stall: bool,
    /// Stall detection only starts once the epoch loss has dropped to this
    /// fraction of the first epoch's loss; the small-init plateau at the
    /// start of training would otherwise decay the rate to nothing.
    pub decay_after_progress: f64,
    pub stall_window: usize,
    pub stall_threshold: f64,
    pub decay_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: DEFAULT_LEARNING_RATE,
            clip_norm: CLIP_NORM,
            decay_on_stall: true,
            decay_after_progress: 0.5,
            stall_window: 5,
            stall_threshold: 0.01,
            decay_factor: 0.5,
        }
    }
}

/// Epoch-by-epoch training state. Pairs are visited in the given order,
/// one parameter update per pair, so runs are bit-reproducible.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: GruModel,
    pub config: TrainConfig,
    learning_rate: f64,
    losses: Vec<f64>,
    last_decay: usize,
}

impl Trainer {
    pub fn new(model: GruModel, config: TrainConfig) -> Trainer {
        Trainer {
            learning_rate: config.learning_rate,
            model,
            config,
            losses: Vec::new(),
            last_decay: 0,
        }
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Runs one pass over `pairs` and returns the epoch's per-symbol mean
    /// loss, accumulated before each pair's update.
    pub fn run_epoch(&mut self, pairs: &[TrainPair]) -> Result<f64, Seq2SeqError> {
        if pairs.is_empty() {
            return Err(Seq2SeqError::Argument("no training pairs".into()));
        }
        let epoch = self.losses.len();
        let mut total = 0.0;
        let mut symbols = 0usize;
        for pair in pairs {
            let (loss, mut grad) = loss_and_gradients(&self.model, pair)?;
            if !loss.total.is_finite() {
                return Err(Seq2SeqError::NonFinite { epoch });
            }
            total += loss.total;
            symbols += loss.symbols;
            if self.learning_rate != 0.0 {
                grad.clip(self.config.clip_norm);
                let lr = self.learning_rate;
                for ((_, p), (_, g)) in self.model.tensors_mut().into_iter().zip(grad.tensors()) {
                    p.sub_scaled(lr, g);
                }
            }
        }
        let mean = total / symbols as f64;
        if !mean.is_finite() {
            return Err(Seq2SeqError::NonFinite { epoch });
        }
        self.losses.push(mean);
        self.maybe_decay();
        Ok(mean)
    }

    fn maybe_decay(&mut self) {
        let w = self.config.stall_window;
        let n = self.losses.len();
        if !self.config.decay_on_stall || w == 0 || n < self.last_decay + w + 1 {
            return;
        }
        let before = self.losses[n - 1 - w];
        let now = self.losses[n - 1];
        if now > self.config.decay_after_progress * self.losses[0] {
            return;
        }
        if before - now < self.config.stall_threshold * before.abs() {
            self.learning_rate *= self.config.decay_factor;
            self.last_decay = n - 1;
        }
    }

    pub fn finish(self) -> (GruModel, Vec<f64>) {
        (self.model, self.losses)
    }
}

/// Trains for `config.epochs` epochs and returns the model with one loss
/// entry per epoch.
pub fn train(
    model: GruModel,
    pairs: &[TrainPair],
    config: TrainConfig,
) -> Result<(GruModel, Vec<f64>), Seq2SeqError> {
    if pairs.is_empty() {
        return Err(Seq2SeqError::Argument("no training pairs".into()));
    }
    for p in pairs {
        model.check_ids(&p.source)?;
        model.check_ids(&p.target)?;
    }
    let epochs = config.epochs;
    let mut trainer = Trainer::new(model, config);
    for _ in 0..epochs {
        trainer.run_epoch(pairs)?;
    }
    Ok(trainer.finish())
}

/// Denominator floor for the relative error. With `epsilon = 1e-5` and a
/// per-symbol loss near `ln |V|`, cancellation in the central difference
/// leaves about `1e-10` of absolute noise, so relative error is only
/// meaningful for gradients well above `1e-6`.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`, maximized.
    pub max_relative_error: f64,
    /// The same ratio with a `1e-8` floor, for diagnostics.
    pub max_unfloored_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Central finite-difference check of [`loss_and_gradients`] on a random
/// subsample of parameters (every tensor is represented).
pub fn gradient_check(
    model: &GruModel,
    pair: &TrainPair,
    epsilon: f64,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport, Seq2SeqError> {
    gradient_check_with(model, pair, epsilon, tolerance, seed, |_| {})
}

/// Like [`gradient_check`], but lets the caller tamper with the analytic
/// gradients first.
pub fn gradient_check_with(
    model: &GruModel,
    pair: &TrainPair,
    epsilon: f64,
    tolerance: f64,
    seed: u64,
    mutate: impl FnOnce(&mut Gradients),
) -> Result<GradCheckReport, Seq2SeqError> {
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Seq2SeqError::Argument(format!(
            "epsilon {epsilon} outside [1e-6, 1e-4]"
        )));
    }
    let (_, mut grad) = loss_and_gradients(model, pair)?;
    mutate(&mut grad);

    const PER_TENSOR: usize = 16;
    const TOTAL: usize = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<usize> = model.tensors().iter().map(|(_, m)| m.data.len()).collect();
    let mut picks: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (t, &n) in sizes.iter().enumerate() {
        let want = n.min(PER_TENSOR);
        while picks.range((t, 0)..(t + 1, 0)).count() < want {
            picks.insert((t, rng.random_range(0..n)));
        }
    }
    let all: usize = sizes.iter().sum();
    while picks.len() < TOTAL.min(all) {
        let mut flat = rng.random_range(0..all);
        let mut t = 0;
        while flat >= sizes[t] {
            flat -= sizes[t];
            t += 1;
        }
        picks.insert((t, flat));
    }

    let grads = grad.tensors();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_unfloored_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        worst_tensor: grads[0].0,
        worst_index: 0,
        tolerance,
    };
    let mut probe = model.clone();
    for (t, i) in picks {
        let original = model.tensors()[t].1.data[i];
        probe.tensors_mut()[t].1.data[i] = original + epsilon;
        let plus = pair_loss(&probe, pair)?.mean();
        probe.tensors_mut()[t].1.data[i] = original - epsilon;
        let minus = pair_loss(&probe, pair)?.mean();
        probe.tensors_mut()[t].1.data[i] = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let analytic = grads[t].1.data[i];
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel = diff / scale.max(RELATIVE_ERROR_FLOOR);
        report.max_unfloored_error = report.max_unfloored_error.max(diff / scale.max(1e-8));
        report.max_abs_error = report.max_abs_error.max(diff);
        report.checked += 1;
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_tensor = grads[t].0;
            report.worst_index = i;
        }
    }
    Ok(report)
}
