// SPDX-License-Identifier: Apache-2.0

//! Textual checkpoint container.
//!
//! ```text
//! {"digest":"<sha256 of body>","body":{"format":"paramdoc-gru","version":1,
//!   "vocab":"<chars>","input_dim":32,"hidden_dim":64,
//!   "tensors":[{"name":"embedding","rows":..,"cols":..,"data":[..row-major..]},..]}}
//! ```
//!
//! The digest covers the exact serialized bytes of `body`. Floats are
//! written in shortest round-trip form, so reading and re-writing a
//! checkpoint reproduces the same bytes.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::model::GruModel;
use super::{GruCellParams, Seq2SeqError, Vocab};
use crate::digest::sha256_hex;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "paramdoc-gru";

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    format: String,
    version: u32,
    vocab: String,
    input_dim: usize,
    hidden_dim: usize,
    tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    digest: String,
    body: Body,
}

pub fn write_checkpoint(model: &GruModel) -> String {
    let body = Body {
        format: FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        vocab: model.vocab.chars(),
        input_dim: model.input_dim,
        hidden_dim: model.hidden_dim,
        tensors: model
            .tensors()
            .into_iter()
            .map(|(name, m)| Tensor {
                name: name.to_string(),
                rows: m.rows,
                cols: m.cols,
                data: m.data.clone(),
            })
            .collect(),
    };
    let body_json = serde_json::to_string(&body).expect("checkpoint body serializes");
    let mut out = format!(
        "{{\"digest\":\"{}\",\"body\":",
        sha256_hex(body_json.as_bytes())
    );
    out.push_str(&body_json);
    out.push_str("}\n");
    out
}

pub fn read_checkpoint(text: &str) -> Result<GruModel, Seq2SeqError> {
    let bad = |m: String| Seq2SeqError::Checkpoint(m);
    let env: Envelope = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let body_json = serde_json::to_string(&env.body).expect("checkpoint body serializes");
    if sha256_hex(body_json.as_bytes()) != env.digest {
        return Err(bad("integrity digest mismatch".into()));
    }
    let body = env.body;
    if body.format != FORMAT || body.version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported checkpoint {} v{}",
            body.format, body.version
        )));
    }
    let vocab = Vocab::from_chars(&body.vocab)?;
    let mut model = GruModel {
        embedding: Matrix::zeros(0, 0),
        encoder: GruCellParams::zeros(0, 0),
        decoder: GruCellParams::zeros(0, 0),
        output_proj: Matrix::zeros(0, 0),
        vocab,
        hidden_dim: body.hidden_dim,
        input_dim: body.input_dim,
    };
    let slots = model.tensors_mut();
    if slots.len() != body.tensors.len() {
        return Err(bad(format!(
            "expected {} tensors, found {}",
            slots.len(),
            body.tensors.len()
        )));
    }
    for ((name, slot), t) in slots.into_iter().zip(body.tensors) {
        if t.name != name {
            return Err(bad(format!("expected tensor `{name}`, found `{}`", t.name)));
        }
        if t.data.len() != t.rows * t.cols {
            return Err(bad(format!(
                "tensor `{name}` has {} values for {}x{}",
                t.data.len(),
                t.rows,
                t.cols
            )));
        }
        *slot = Matrix {
            rows: t.rows,
            cols: t.cols,
            data: t.data,
        };
    }
    model.validate()?;
    Ok(model)
}
