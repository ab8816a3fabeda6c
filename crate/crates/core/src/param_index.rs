// SPDX-License-Identifier: Apache-2.0

//! Inverted index from parameter name to every documented occurrence, plus
//! description clustering and search-based candidate ranking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, ParamType, ParameterRecord};

/// Bumped whenever the cache layout changes.
pub const INDEX_CACHE_VERSION: u32 = 1;

/// Scope weights for a source API relative to the querying API.
pub const SAME_PRODUCT_WEIGHT: f64 = 1.0;
pub const SAME_CATEGORY_WEIGHT: f64 = 0.8;
pub const OTHER_SCOPE_WEIGHT: f64 = 0.6;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unknown api `{0}`")]
    UnknownApi(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("index cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub api_id: String,
    pub product: String,
    pub category: String,
    pub record: ParameterRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ApiScope {
    product: String,
    category: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    apis: BTreeMap<String, ApiScope>,
}

/// Builds the name → occurrences index. Posting lists are ordered by
/// `(product, api_id, direction)`.
pub fn build_index(corpus: &Corpus) -> ParamIndex {
    let mut index = ParamIndex::default();
    for spec in corpus.iter() {
        index.apis.insert(
            spec.api_id.clone(),
            ApiScope {
                product: spec.product.clone(),
                category: spec.category.clone(),
            },
        );
        for record in &spec.parameters {
            index
                .postings
                .entry(record.name.clone())
                .or_default()
                .push(Posting {
                    api_id: spec.api_id.clone(),
                    product: spec.product.clone(),
                    category: spec.category.clone(),
                    record: record.clone(),
                });
        }
    }
    for list in index.postings.values_mut() {
        list.sort_by(|a, b| {
            (&a.product, &a.api_id, a.record.direction).cmp(&(
                &b.product,
                &b.api_id,
                b.record.direction,
            ))
        });
    }
    index
}

impl ParamIndex {
    pub fn postings(&self, name: &str) -> &[Posting] {
        self.postings.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }

    pub fn total_postings(&self) -> usize {
        self.postings.values().map(Vec::len).sum()
    }

    pub fn contains_api(&self, api_id: &str) -> bool {
        self.apis.contains_key(api_id)
    }

    /// Wraps the index in the versioned cache envelope.
    pub fn to_cache(&self, corpus: &Corpus) -> String {
        let cache = IndexCacheRef {
            version: INDEX_CACHE_VERSION,
            corpus_digest: corpus.digest(),
            index: self,
        };
        serde_json::to_string(&cache).expect("index always serializes")
    }

    /// Loads a cached index, refusing it when the version differs or when it
    /// was built from a different corpus.
    pub fn from_cache(text: &str, corpus: &Corpus) -> Result<ParamIndex, IndexError> {
        let cache: IndexCache =
            serde_json::from_str(text).map_err(|e| IndexError::Cache(e.to_string()))?;
        if cache.version != INDEX_CACHE_VERSION {
            return Err(IndexError::Cache(format!(
                "unsupported version {} (expected {INDEX_CACHE_VERSION})",
                cache.version
            )));
        }
        if cache.corpus_digest != corpus.digest() {
            return Err(IndexError::Cache("stale: corpus digest mismatch".into()));
        }
        Ok(cache.index)
    }
}

#[derive(Serialize)]
struct IndexCacheRef<'a> {
    version: u32,
    corpus_digest: String,
    index: &'a ParamIndex,
}

#[derive(Deserialize)]
struct IndexCache {
    version: u32,
    corpus_digest: String,
    index: ParamIndex,
}

/// Normalized Levenshtein similarity on whitespace-trimmed strings,
/// `1 - distance / max(len)`, with two empty strings counting as identical.
pub fn string_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a.trim(), b.trim())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterCluster {
    pub name: String,
    /// Distinct non-empty descriptions with occurrence counts, most frequent
    /// first.
    pub descriptions: Vec<(String, usize)>,
    /// Similarity of the two most similar distinct descriptions; `None` with
    /// fewer than two.
    pub set_similarity: Option<f64>,
}

pub fn cluster_descriptions(
    index: &ParamIndex,
    name: &str,
) -> Result<ParameterCluster, IndexError> {
    let postings = index
        .postings
        .get(name)
        .ok_or_else(|| IndexError::UnknownParameter(name.to_string()))?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in postings {
        let d = p.record.description.trim();
        if !d.is_empty() {
            *counts.entry(d).or_default() += 1;
        }
    }
    let distinct: Vec<&str> = counts.keys().copied().collect();
    let mut set_similarity: Option<f64> = None;
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            let s = string_similarity(a, b);
            set_similarity = Some(set_similarity.map_or(s, |m| m.max(s)));
        }
    }
    let mut descriptions: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(d, c)| (d.to_string(), c))
        .collect();
    descriptions.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ParameterCluster {
        name: name.to_string(),
        descriptions,
        set_similarity,
    })
}

/// Mean set similarity over clusters that have at least two distinct
/// descriptions. `Ok(None)` when no cluster qualifies.
pub fn consistency_report(index: &ParamIndex) -> Result<Option<f64>, IndexError> {
    if index.is_empty() {
        return Err(IndexError::EmptyIndex);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for name in index.names() {
        if let Some(s) = cluster_descriptions(index, name)?.set_similarity {
            sum += s;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CandidateKind {
    SearchBased,
    TranslationBased,
    /// Example values mined from request logs.
    LogDerived,
}

impl CandidateKind {
    pub fn tag(self) -> &'static str {
        match self {
            CandidateKind::SearchBased => "search",
            CandidateKind::TranslationBased => "translation",
            CandidateKind::LogDerived => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub description: String,
    pub example: String,
    pub ptype: Option<ParamType>,
    pub required: Option<bool>,
    pub score: f64,
    pub provenance: Vec<String>,
}

/// Search-based candidates for `param_name` in `api_id`, drawn from every
/// other API that documents the same name.
///
/// Identical `(description, example, type, required)` occurrences are
/// grouped. A group's score is its share of the other APIs' postings times
/// the best scope weight among its sources (same product, same category,
/// anything else). Ties go to the lexicographically smallest first
/// provenance id.
pub fn recommend(
    index: &ParamIndex,
    api_id: &str,
    param_name: &str,
    k: usize,
) -> Result<Vec<Candidate>, IndexError> {
    if k == 0 {
        return Err(IndexError::Argument("k must be positive".into()));
    }
    if param_name.is_empty() {
        return Err(IndexError::Argument("param_name must be non-empty".into()));
    }
    let query = index
        .apis
        .get(api_id)
        .ok_or_else(|| IndexError::UnknownApi(api_id.to_string()))?;

    let others: Vec<&Posting> = index
        .postings(param_name)
        .iter()
        .filter(|p| p.api_id != api_id)
        .collect();
    if others.is_empty() {
        return Ok(Vec::new());
    }

    struct Group<'a> {
        size: usize,
        weight: f64,
        provenance: BTreeSet<&'a str>,
    }
    let mut groups: BTreeMap<(&str, &str, ParamType, bool), Group> = BTreeMap::new();
    for p in &others {
        let r = &p.record;
        if r.description.trim().is_empty() && r.example.trim().is_empty() {
            continue;
        }
        let weight = if p.product == query.product {
            SAME_PRODUCT_WEIGHT
        } else if p.category == query.category {
            SAME_CATEGORY_WEIGHT
        } else {
            OTHER_SCOPE_WEIGHT
        };
        let g = groups
            .entry((
                r.description.as_str(),
                r.example.as_str(),
                r.ptype,
                r.required,
            ))
            .or_insert_with(|| Group {
                size: 0,
                weight: 0.0,
                provenance: BTreeSet::new(),
            });
        g.size += 1;
        g.weight = g.weight.max(weight);
        g.provenance.insert(&p.api_id);
    }

    let denom = others.len() as f64;
    let mut out: Vec<Candidate> = groups
        .into_iter()
        .map(|((description, example, ptype, required), g)| Candidate {
            kind: CandidateKind::SearchBased,
            description: description.to_string(),
            example: example.to_string(),
            ptype: Some(ptype),
            required: Some(required),
            score: g.weight * g.size as f64 / denom,
            provenance: g.provenance.into_iter().map(str::to_string).collect(),
        })
        .collect();
    // BTreeMap iteration already orders groups by content, which settles any
    // tie the rules below leave open.
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.provenance[0].cmp(&b.provenance[0]))
    });
    out.truncate(k);
    Ok(out)
}
