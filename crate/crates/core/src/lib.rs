// SPDX-License-Identifier: Apache-2.0

//! Parameter-level API documentation generation.
//!
//! The crate is split along the three content sources a documentation
//! engineer is offered for a blank parameter field:
//!
//! - [`corpus`] and [`param_index`]: search-based recommendation. A
//!   parameter that is already documented in some other API document is
//!   proposed with that document's description and example.
//! - [`seq2seq`]: a character-level GRU encoder/decoder that translates
//!   `api_name SEP param_name` into a description, so every parameter gets
//!   at least one candidate.
//! - [`abstraction`]: a map/reduce pass over logged request values that
//!   extracts the dominant character-class pattern, coverage-thresholded
//!   common strings, and representative example values.

pub mod abstraction;
pub mod corpus;
pub mod param_index;
pub mod seq2seq;

mod digest;

pub use abstraction::{PatternProfile, ShardSummary, ValueShard};
pub use corpus::{ApiSpec, Corpus, DedupStats, Direction, ParamType, ParameterRecord};
pub use param_index::{Candidate, CandidateKind, ParamIndex, ParameterCluster};
pub use seq2seq::{GruCellParams, GruModel, GruState, Vocab};
