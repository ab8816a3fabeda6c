// SPDX-License-Identifier: Apache-2.0

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{step_cached, GruCellParams, GruState};
use super::matrix::Matrix;
use super::{encode_source, Seq2SeqError, Vocab, BOS, EOS, INIT_SCALE};
use crate::param_index::{Candidate, CandidateKind};

pub const DEFAULT_MAX_DECODE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruModel {
    pub vocab: Vocab,
    /// `|vocab| × input_dim`
    pub embedding: Matrix,
    pub encoder: GruCellParams,
    pub decoder: GruCellParams,
    /// `|vocab| × hidden_dim`, no bias.
    pub output_proj: Matrix,
    pub hidden_dim: usize,
    pub input_dim: usize,
}

impl GruModel {
    /// Uniform initialization in `[-0.08, 0.08]` from a seeded ChaCha stream.
    pub fn new(vocab: Vocab, input_dim: usize, hidden_dim: usize, seed: u64) -> GruModel {
        GruModel::with_init_scale(vocab, input_dim, hidden_dim, seed, INIT_SCALE)
    }

    pub fn with_init_scale(
        vocab: Vocab,
        input_dim: usize,
        hidden_dim: usize,
        seed: u64,
        scale: f64,
    ) -> GruModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vocab.len();
        let embedding = Matrix::uniform(v, input_dim, scale, &mut rng);
        let encoder = GruCellParams::uniform(input_dim, hidden_dim, scale, &mut rng);
        let decoder = GruCellParams::uniform(input_dim, hidden_dim, scale, &mut rng);
        let output_proj = Matrix::uniform(v, hidden_dim, scale, &mut rng);
        GruModel {
            vocab,
            embedding,
            encoder,
            decoder,
            output_proj,
            hidden_dim,
            input_dim,
        }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        if self.hidden_dim == 0 || self.input_dim == 0 {
            return Err(Seq2SeqError::Dimension(
                "dimensions must be positive".into(),
            ));
        }
        let v = self.vocab.len();
        if self.embedding.rows != v || self.embedding.cols != self.input_dim {
            return Err(Seq2SeqError::Dimension("embedding shape".into()));
        }
        if self.output_proj.rows != v || self.output_proj.cols != self.hidden_dim {
            return Err(Seq2SeqError::Dimension("output projection shape".into()));
        }
        for cell in [&self.encoder, &self.decoder] {
            cell.validate()?;
            if cell.input_dim() != self.input_dim || cell.hidden_dim() != self.hidden_dim {
                return Err(Seq2SeqError::Dimension(
                    "cell does not match model dimensions".into(),
                ));
            }
        }
        if !self.embedding.is_finite() || !self.output_proj.is_finite() {
            return Err(Seq2SeqError::Argument("non-finite parameters".into()));
        }
        Ok(())
    }

    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<(), Seq2SeqError> {
        match ids.iter().find(|&&i| i >= self.vocab.len()) {
            Some(i) => Err(Seq2SeqError::Argument(format!(
                "id {i} outside vocab of {}",
                self.vocab.len()
            ))),
            None => Ok(()),
        }
    }

    /// Every matrix in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![("embedding", &self.embedding)];
        for (name, m) in ENCODER_NAMES.iter().zip(self.encoder.matrices()) {
            out.push((name, m));
        }
        for (name, m) in DECODER_NAMES.iter().zip(self.decoder.matrices()) {
            out.push((name, m));
        }
        out.push(("output_proj", &self.output_proj));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = vec![("embedding", &mut self.embedding)];
        for (name, m) in ENCODER_NAMES.iter().zip(self.encoder.matrices_mut()) {
            out.push((name, m));
        }
        for (name, m) in DECODER_NAMES.iter().zip(self.decoder.matrices_mut()) {
            out.push((name, m));
        }
        out.push(("output_proj", &mut self.output_proj));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }
}

pub(crate) const ENCODER_NAMES: [&str; 6] = [
    "encoder.w_z",
    "encoder.u_z",
    "encoder.w_r",
    "encoder.u_r",
    "encoder.w",
    "encoder.u",
];
pub(crate) const DECODER_NAMES: [&str; 6] = [
    "decoder.w_z",
    "decoder.u_z",
    "decoder.w_r",
    "decoder.u_r",
    "decoder.w",
    "decoder.u",
];

/// Log-softmax of `output_proj · h`.
pub(crate) fn log_probs(model: &GruModel, h: &[f64]) -> Vec<f64> {
    let logits = model.output_proj.matvec(h);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.into_iter().map(|l| l - lse).collect()
}

/// Folds the encoder cell over the embedded ids from `h_0 = 0`.
pub fn encoder_forward(model: &GruModel, ids: &[usize]) -> Result<GruState, Seq2SeqError> {
    if ids.is_empty() {
        return Err(Seq2SeqError::Argument("empty source sequence".into()));
    }
    model.check_ids(ids)?;
    let mut h = vec![0.0; model.hidden_dim];
    for &id in ids {
        h = step_cached(&model.encoder, model.embedding.row(id), &h).h;
    }
    Ok(GruState { h })
}

/// Greedy decode returning the emitted ids (without `BOS`/`EOS`) and the
/// log-probability of every choice made, including a final `EOS`.
pub fn decode_greedy_scored(
    model: &GruModel,
    context: &GruState,
    max_len: usize,
) -> (Vec<usize>, Vec<f64>) {
    let mut h = context.h.clone();
    let mut prev = BOS;
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..max_len {
        h = step_cached(&model.decoder, model.embedding.row(prev), &h).h;
        let lp = log_probs(model, &h);
        // Ties resolve to the lowest id.
        let (best, &best_lp) =
            lp.iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| {
                    if *v > *acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
        scores.push(best_lp);
        if best == EOS {
            break;
        }
        ids.push(best);
        prev = best;
    }
    (ids, scores)
}

pub fn decode_greedy(model: &GruModel, context: &GruState, max_len: usize) -> Vec<usize> {
    decode_greedy_scored(model, context, max_len).0
}

/// Translation-based candidate for one parameter. The score is the
/// geometric-mean probability of the greedy choices.
pub fn generate_description(
    model: &GruModel,
    api_name: &str,
    param_name: &str,
) -> Result<Candidate, Seq2SeqError> {
    let source = encode_source(api_name, param_name, &model.vocab)?;
    let context = encoder_forward(model, &source)?;
    let (ids, scores) = decode_greedy_scored(model, &context, DEFAULT_MAX_DECODE_LEN);
    let score = if scores.is_empty() {
        1.0
    } else {
        (scores.iter().sum::<f64>() / scores.len() as f64).exp()
    };
    Ok(Candidate {
        kind: CandidateKind::TranslationBased,
        description: model.vocab.decode(&ids),
        example: String::new(),
        ptype: None,
        required: None,
        score,
        provenance: Vec::new(),
    })
}
