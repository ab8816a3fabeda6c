// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use paramdoc_core::abstraction::read_profile_dir;
use paramdoc_core::seq2seq::read_checkpoint;
use paramdoc_core::Corpus;
use serde::Deserialize;

use crate::candidates::Recommender;
use crate::ServiceError;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

/// Artifact locations and the listen address.
///
/// ```toml
/// corpus = "data/sms_corpus.jsonl"
/// model = "out/model.json"      # optional
/// profiles = "out/profiles"     # optional
/// listen = "127.0.0.1:8080"
/// events = "out/events.jsonl"
/// ```
///
/// Relative paths in a file are taken relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default = "default_listen")]
    pub listen: String,
    pub events: PathBuf,
}

fn default_listen() -> String {
    DEFAULT_LISTEN.to_string()
}

impl ServeConfig {
    pub fn from_toml(text: &str) -> Result<ServeConfig, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ServeConfig, ServiceError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = ServeConfig::from_toml(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.events);
        if let Some(m) = self.model.as_mut() {
            fix(m);
        }
        if let Some(p) = self.profiles.as_mut() {
            fix(p);
        }
    }

    /// Loads corpus, optional model and optional profiles.
    pub fn recommender(&self) -> Result<Recommender, ServiceError> {
        let io =
            |p: &Path, e: &dyn std::fmt::Display| ServiceError::Io(format!("{}: {e}", p.display()));
        let text = fs::read_to_string(&self.corpus).map_err(|e| io(&self.corpus, &e))?;
        let corpus = Corpus::from_ndjson(&text).map_err(|e| io(&self.corpus, &e))?;
        let mut rec = Recommender::new(corpus);
        if let Some(path) = &self.model {
            let text = fs::read_to_string(path).map_err(|e| io(path, &e))?;
            rec = rec.with_model(read_checkpoint(&text).map_err(|e| io(path, &e))?);
        }
        if let Some(path) = &self.profiles {
            rec = rec.with_profiles(read_profile_dir(path).map_err(|e| io(path, &e))?);
        }
        Ok(rec)
    }
}
