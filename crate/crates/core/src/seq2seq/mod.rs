// SPDX-License-Identifier: Apache-2.0

//! Character-level GRU encoder/decoder translating `api_name SEP
//! param_name` into a parameter description.
//!
//! The encoder folds the cell over the embedded source starting from a zero
//! state; the decoder starts from the encoder's final state and feeds back
//! its previous symbol, beginning with `BOS`. There is no attention and no
//! bias anywhere in the network.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod checkpoint;
mod gru;
mod matrix;
mod model;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gru::{gru_cell_step, gru_cell_trace, GruCellParams, GruState, StepCache};
pub use matrix::Matrix;
pub use model::{
    decode_greedy, decode_greedy_scored, encoder_forward, generate_description, GruModel,
    DEFAULT_MAX_DECODE_LEN,
};
pub use train::{
    evaluate_loss, exact_match_rate, gradient_check, gradient_check_with, loss_and_gradients,
    train, GradCheckReport, Gradients, LossReport, TrainConfig, TrainPair, Trainer,
    RELATIVE_ERROR_FLOOR,
};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SEP: usize = 4;
pub const NUM_SPECIALS: usize = 5;

pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_INPUT_DIM: usize = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const INIT_SCALE: f64 = 0.08;
pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training pairs line {line}: {message}")]
    PairFormat { line: usize, message: String },
}

/// Specials occupy ids `0..5`; characters follow in code-point order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    chars: Vec<char>,
}

impl Vocab {
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vocab {
        let set: BTreeSet<char> = texts.into_iter().flat_map(str::chars).collect();
        Vocab {
            chars: set.into_iter().collect(),
        }
    }

    pub fn from_chars(chars: &str) -> Result<Vocab, Seq2SeqError> {
        let v: Vec<char> = chars.chars().collect();
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Seq2SeqError::Checkpoint(
                "vocab characters must be strictly increasing".into(),
            ));
        }
        Ok(Vocab { chars: v })
    }

    pub fn chars(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn len(&self) -> usize {
        NUM_SPECIALS + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.chars
            .binary_search(&c)
            .map_or(UNK, |i| i + NUM_SPECIALS)
    }

    /// The character for `id`, or `None` for specials and out-of-range ids.
    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(NUM_SPECIALS)
            .and_then(|i| self.chars.get(i).copied())
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.id(c)).collect()
    }

    /// Drops specials.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().filter_map(|&i| self.char_of(i)).collect()
    }
}

/// `chars(api_name) ++ [SEP] ++ chars(param_name)`, no `BOS`/`EOS`.
pub fn encode_source(
    api_name: &str,
    param_name: &str,
    vocab: &Vocab,
) -> Result<Vec<usize>, Seq2SeqError> {
    if api_name.is_empty() || param_name.is_empty() {
        return Err(Seq2SeqError::Argument(
            "api and parameter names must be non-empty".into(),
        ));
    }
    let mut ids = vocab.encode_text(api_name);
    ids.push(SEP);
    ids.extend(vocab.encode_text(param_name));
    Ok(ids)
}

/// One line of a training-pair file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub api_name: String,
    pub param_name: String,
    pub description: String,
}

/// Parses `api_name TAB param_name TAB description` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<TextPair>, Seq2SeqError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(p), Some(d)) if !a.is_empty() && !p.is_empty() => out.push(TextPair {
                api_name: a.to_string(),
                param_name: p.to_string(),
                description: d.to_string(),
            }),
            _ => {
                return Err(Seq2SeqError::PairFormat {
                    line: i + 1,
                    message: "expected api_name<TAB>param_name<TAB>description".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Builds a vocabulary from every character on either side of the pairs.
pub fn vocab_for_pairs(pairs: &[TextPair]) -> Vocab {
    Vocab::from_texts(pairs.iter().flat_map(|p| {
        [
            p.api_name.as_str(),
            p.param_name.as_str(),
            p.description.as_str(),
        ]
    }))
}

pub fn encode_pairs(pairs: &[TextPair], vocab: &Vocab) -> Result<Vec<TrainPair>, Seq2SeqError> {
    pairs
        .iter()
        .map(|p| {
            Ok(TrainPair {
                source: encode_source(&p.api_name, &p.param_name, vocab)?,
                target: vocab.encode_text(&p.description),
            })
        })
        .collect()
}
