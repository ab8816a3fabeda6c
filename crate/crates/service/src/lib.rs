// SPDX-License-Identifier: Apache-2.0

//! Recommendation service: candidate lists per documentation cell, an
//! append-only feedback log, and acceptance-rate metrics over it.

use thiserror::Error;

pub mod candidates;
pub mod config;
pub mod events;
pub mod http;
pub mod metrics;

pub use candidates::{fingerprint, Recommender, ServedCandidate};
pub use config::ServeConfig;
pub use events::{EventStore, Field, RecommendationEvent, RecordOutcome};
pub use http::{router, serve, serve_blocking, AppState};
pub use metrics::{
    acceptance_by_kind, acceptance_rate, weekly_series, AcceptanceStats, WeekBucket, Window,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid event: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}
