// SPDX-License-Identifier: Apache-2.0

//! Per-field candidate lists merged from every loaded source.

use std::collections::{BTreeMap, HashSet};

use paramdoc_core::abstraction::{GroupKey, ProfileDocument};
use paramdoc_core::param_index::{build_index, recommend, IndexError};
use paramdoc_core::seq2seq::generate_description;
use paramdoc_core::{CandidateKind, Corpus, GruModel, ParamIndex};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::events::Field;
use crate::ServiceError;

/// One entry of a served candidate list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServedCandidate {
    /// `<kind>:<16 hex>`; events refer to candidates by this value.
    pub fingerprint: String,
    pub kind: String,
    pub content: String,
    pub score: f64,
    /// Source API ids for search results, the profile key for log results.
    pub provenance: Vec<String>,
}

/// Stable id for a candidate: the kind tag plus a truncated SHA-256 of the
/// field name and content.
pub fn fingerprint(kind: CandidateKind, field: Field, content: &str) -> String {
    let mut h = Sha256::new();
    h.update(field.as_str().as_bytes());
    h.update([0u8]);
    h.update(content.as_bytes());
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("{}:{hex}", kind.tag())
}

pub struct Recommender {
    corpus: Corpus,
    index: ParamIndex,
    model: Option<GruModel>,
    profiles: BTreeMap<GroupKey, ProfileDocument>,
}

impl Recommender {
    pub fn new(corpus: Corpus) -> Recommender {
        let index = build_index(&corpus);
        Recommender {
            corpus,
            index,
            model: None,
            profiles: BTreeMap::new(),
        }
    }

    pub fn with_model(mut self, model: GruModel) -> Recommender {
        self.model = Some(model);
        self
    }

    pub fn with_profiles(mut self, profiles: BTreeMap<GroupKey, ProfileDocument>) -> Recommender {
        self.profiles = profiles;
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }

    pub fn profile_count(&self) -> usize {
        self.profiles.len()
    }

    /// Ranked, content-deduplicated candidates for one cell of an API
    /// document. `api` may be an id or a unique API name.
    pub fn get_candidates(
        &self,
        api: &str,
        param_name: &str,
        field: Field,
        k: usize,
    ) -> Result<Vec<ServedCandidate>, ServiceError> {
        if k == 0 {
            return Err(ServiceError::Argument("k must be positive".into()));
        }
        let spec = self
            .corpus
            .resolve(api)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown api `{api}`")))?;
        if spec.parameter(param_name).is_none() {
            return Err(ServiceError::NotFound(format!(
                "api `{}` has no parameter `{param_name}`",
                spec.api_id
            )));
        }

        let wide = self.index.postings(param_name).len().max(1);
        let search =
            recommend(&self.index, &spec.api_id, param_name, wide).map_err(|e| match e {
                IndexError::UnknownApi(_) | IndexError::UnknownParameter(_) => {
                    ServiceError::NotFound(e.to_string())
                }
                other => ServiceError::Argument(other.to_string()),
            })?;

        let mut raw: Vec<(CandidateKind, String, f64, Vec<String>)> = Vec::new();
        match field {
            Field::Description => {
                for c in search {
                    raw.push((c.kind, c.description, c.score, c.provenance));
                }
                if let Some(model) = &self.model {
                    // Names outside the model's vocabulary still encode (as UNK).
                    if let Ok(c) = generate_description(model, &spec.api_name, param_name) {
                        raw.push((c.kind, c.description, c.score, Vec::new()));
                    }
                }
            }
            Field::Example => {
                let keys = [
                    GroupKey {
                        api_name: Some(spec.api_name.clone()),
                        param_name: param_name.to_string(),
                    },
                    GroupKey {
                        api_name: None,
                        param_name: param_name.to_string(),
                    },
                ];
                for key in keys {
                    if let Some(doc) = self.profiles.get(&key) {
                        let origin = key.relative_path().to_string_lossy().replace('\\', "/");
                        for ex in &doc.examples {
                            raw.push((
                                CandidateKind::LogDerived,
                                ex.clone(),
                                doc.rate,
                                vec![origin.clone()],
                            ));
                        }
                    }
                }
                for c in search {
                    raw.push((c.kind, c.example, c.score, c.provenance));
                }
            }
            Field::Type => {
                for c in search {
                    let content = c.ptype.map(|t| t.as_str().to_string()).unwrap_or_default();
                    raw.push((c.kind, content, c.score, c.provenance));
                }
            }
            Field::Required => {
                for c in search {
                    let content = c.required.map(|r| r.to_string()).unwrap_or_default();
                    raw.push((c.kind, content, c.score, c.provenance));
                }
            }
        }

        // Search groups differ on other fields, so the same content can show
        // up repeatedly; keep the first (best-ranked) one.
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (kind, content, score, provenance) in raw {
            if content.trim().is_empty() || !seen.insert(content.clone()) {
                continue;
            }
            out.push(ServedCandidate {
                fingerprint: fingerprint(kind, field, &content),
                kind: kind.tag().to_string(),
                content,
                score,
                provenance,
            });
            if out.len() == k {
                break;
            }
        }
        Ok(out)
    }
}
