// SPDX-License-Identifier: Apache-2.0

//! Structured API documents and the corpus they live in.
//!
//! A corpus file is newline-delimited JSON, one API document per line:
//!
//! ```text
//! {"api_id":"sms.SendSms","api_name":"SendSms","product":"sms","category":"messaging",
//!  "parameters":[{"name":"SignName","type":"String","required":true,
//!                 "description":"Signature Name","example":"Aliyun","direction":"Input"}]}
//! ```
//!
//! `type` defaults to `String`, `required` to `false`, and `description` /
//! `example` to the empty string when absent.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("api `{api_id}`: invalid field `{field}`: {message}")]
    Invalid {
        api_id: String,
        field: String,
        message: String,
    },
    #[error("api `{api_id}`: duplicate {direction} parameter `{name}`")]
    DuplicateParameter {
        api_id: String,
        name: String,
        direction: Direction,
    },
    #[error("duplicate api_id `{0}`")]
    DuplicateApi(String),
    #[error("document {doc}: {source}")]
    AtDocument {
        doc: usize,
        #[source]
        source: Box<CorpusError>,
    },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub enum ParamType {
    #[default]
    #[serde(alias = "string")]
    String,
    #[serde(alias = "integer")]
    Integer,
    #[serde(alias = "boolean")]
    Boolean,
    #[serde(alias = "number")]
    Number,
    #[serde(alias = "array")]
    Array,
    #[serde(alias = "object")]
    Object,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::String => "String",
            ParamType::Integer => "Integer",
            ParamType::Boolean => "Boolean",
            ParamType::Number => "Number",
            ParamType::Array => "Array",
            ParamType::Object => "Object",
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(alias = "input")]
    Input,
    #[serde(alias = "output")]
    Output,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Input => f.write_str("input"),
            Direction::Output => f.write_str("output"),
        }
    }
}

/// One row of a parameter table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterRecord {
    pub name: String,
    #[serde(rename = "type", default)]
    pub ptype: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub example: String,
    pub direction: Direction,
}

impl ParameterRecord {
    pub fn new(name: impl Into<String>, direction: Direction) -> Self {
        ParameterRecord {
            name: name.into(),
            ptype: ParamType::String,
            required: false,
            description: String::new(),
            example: String::new(),
            direction,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_example(mut self, example: impl Into<String>) -> Self {
        self.example = example.into();
        self
    }

    pub fn with_type(mut self, ptype: ParamType) -> Self {
        self.ptype = ptype;
        self
    }

    pub fn required(mut self, required: bool) -> Self {
        self.required = required;
        self
    }
}

/// A single API document: its identity plus an ordered parameter table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub api_id: String,
    pub api_name: String,
    #[serde(default)]
    pub product: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub parameters: Vec<ParameterRecord>,
}

impl ApiSpec {
    /// Checks the per-document invariants: non-empty identifiers,
    /// whitespace-free parameter names, unique `(name, direction)` pairs.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |field: &str, message: &str| CorpusError::Invalid {
            api_id: self.api_id.clone(),
            field: field.to_string(),
            message: message.to_string(),
        };
        if self.api_id.trim().is_empty() {
            return Err(invalid("api_id", "must be non-empty"));
        }
        if self.api_name.trim().is_empty() {
            return Err(invalid("api_name", "must be non-empty"));
        }
        let mut seen = HashSet::new();
        for (i, p) in self.parameters.iter().enumerate() {
            if p.name.is_empty() || p.name.chars().any(char::is_whitespace) {
                return Err(invalid(
                    &format!("parameters[{i}].name"),
                    "must be non-empty and contain no whitespace",
                ));
            }
            if !seen.insert((p.name.as_str(), p.direction)) {
                return Err(CorpusError::DuplicateParameter {
                    api_id: self.api_id.clone(),
                    name: p.name.clone(),
                    direction: p.direction,
                });
            }
        }
        Ok(())
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterRecord> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Serializes to the single-line corpus document form.
    pub fn to_document(&self) -> String {
        serde_json::to_string(self).expect("ApiSpec always serializes")
    }
}

/// Parses and validates one corpus document.
pub fn parse_spec(raw: &str) -> Result<ApiSpec, CorpusError> {
    let spec: ApiSpec = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// A validated, immutable set of API documents keyed by `api_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    apis: BTreeMap<String, ApiSpec>,
}

/// Builds a corpus from a sequence of documents. The first failing document
/// aborts the load; its 1-based position is attached to the error.
pub fn load_corpus<'a, I>(source: I) -> Result<Corpus, CorpusError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut corpus = Corpus::default();
    for (i, raw) in source.into_iter().enumerate() {
        let at = |e| CorpusError::AtDocument {
            doc: i + 1,
            source: Box::new(e),
        };
        let spec = parse_spec(raw).map_err(at)?;
        corpus.insert(spec).map_err(at)?;
    }
    Ok(corpus)
}

impl Corpus {
    /// Parses newline-delimited JSON. Blank lines are skipped; error
    /// positions refer to file line numbers.
    pub fn from_ndjson(text: &str) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = |e| CorpusError::AtDocument {
                doc: i + 1,
                source: Box::new(e),
            };
            let spec = parse_spec(line).map_err(at)?;
            corpus.insert(spec).map_err(at)?;
        }
        Ok(corpus)
    }

    pub fn from_specs<I: IntoIterator<Item = ApiSpec>>(specs: I) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::default();
        for spec in specs {
            spec.validate()?;
            corpus.insert(spec)?;
        }
        Ok(corpus)
    }

    fn insert(&mut self, spec: ApiSpec) -> Result<(), CorpusError> {
        if self.apis.contains_key(&spec.api_id) {
            return Err(CorpusError::DuplicateApi(spec.api_id));
        }
        self.apis.insert(spec.api_id.clone(), spec);
        Ok(())
    }

    /// Canonical NDJSON form, ordered by `api_id`.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for spec in self.apis.values() {
            out.push_str(&spec.to_document());
            out.push('\n');
        }
        out
    }

    /// Content digest of the canonical form; order-independent with respect
    /// to how the corpus was loaded.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_ndjson().as_bytes())
    }

    pub fn len(&self) -> usize {
        self.apis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apis.is_empty()
    }

    pub fn get(&self, api_id: &str) -> Option<&ApiSpec> {
        self.apis.get(api_id)
    }

    /// Looks up by `api_id`, falling back to `api_name` when exactly one
    /// API carries that name.
    pub fn resolve(&self, key: &str) -> Option<&ApiSpec> {
        if let Some(spec) = self.apis.get(key) {
            return Some(spec);
        }
        let mut by_name = self.apis.values().filter(|s| s.api_name == key);
        match (by_name.next(), by_name.next()) {
            (Some(spec), None) => Some(spec),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ApiSpec> {
        self.apis.values()
    }

    pub fn parameter_count(&self) -> usize {
        self.apis.values().map(|s| s.parameters.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DedupStats {
    pub total_parameter_occurrences: usize,
    pub unique_parameter_names: usize,
    /// `None` when the corpus has no parameters.
    pub compression_ratio: Option<f64>,
}

/// Counts parameter occurrences and distinct (case-sensitive,
/// direction-agnostic) parameter names.
pub fn corpus_stats(corpus: &Corpus) -> DedupStats {
    let mut names = BTreeSet::new();
    let mut total = 0usize;
    for spec in corpus.iter() {
        for p in &spec.parameters {
            total += 1;
            names.insert(p.name.as_str());
        }
    }
    let unique = names.len();
    DedupStats {
        total_parameter_occurrences: total,
        unique_parameter_names: unique,
        compression_ratio: (unique > 0).then(|| total as f64 / unique as f64),
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parses_send_sms_with_nine_parameters_in_order() {
        let doc = send_sms().to_document();
        let spec = parse_spec(&doc).unwrap();
        assert_eq!(spec.parameters.len(), 9);
        let names: Vec<_> = spec.parameters.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "PhoneNumbers",
                "SignName",
                "TemplateCode",
                "TemplateParam",
                "OutId",
                "Code",
                "Message",
                "BizId",
                "RequestId"
            ]
        );
    }

    #[test]
    fn zero_parameters() {
        let spec = parse_spec(
            r#"{"api_id":"a","api_name":"A","product":"p","category":"c","parameters":[]}"#,
        )
        .unwrap();
        assert!(spec.parameters.is_empty());
        let spec = parse_spec(r#"{"api_id":"a","api_name":"A"}"#).unwrap();
        assert!(spec.parameters.is_empty());
    }

    #[test]
    fn defaults_for_missing_type_and_required() {
        let spec = parse_spec(
            r#"{"api_id":"a","api_name":"A","parameters":[{"name":"X","direction":"Input"}]}"#,
        )
        .unwrap();
        let p = &spec.parameters[0];
        assert_eq!(p.ptype, ParamType::String);
        assert!(!p.required);
        assert_eq!(p.description, "");
    }

    #[test]
    fn duplicate_parameter_is_rejected_by_name() {
        let raw = r#"{"api_id":"a","api_name":"A","parameters":[
            {"name":"SignName","direction":"Input"},
            {"name":"SignName","direction":"Input"}]}"#;
        match parse_spec(raw) {
            Err(CorpusError::DuplicateParameter { name, .. }) => assert_eq!(name, "SignName"),
            other => panic!("unexpected {other:?}"),
        }
        // Same name across directions is fine.
        let raw = r#"{"api_id":"a","api_name":"A","parameters":[
            {"name":"SignName","direction":"Input"},
            {"name":"SignName","direction":"Output"}]}"#;
        assert!(parse_spec(raw).is_ok());
    }

    #[test]
    fn malformed_document_reports_locus() {
        let raw = "{\"api_id\":\"a\",\n\"api_name\":\"A\",\n\"parameters\":[{\"name\":\"X\"}]}";
        match parse_spec(raw) {
            Err(CorpusError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("direction"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn whitespace_in_name_is_invalid() {
        let raw = r#"{"api_id":"a","api_name":"A","parameters":[{"name":"Sign Name","direction":"Input"}]}"#;
        assert!(matches!(parse_spec(raw), Err(CorpusError::Invalid { .. })));
    }

    #[test]
    fn load_corpus_cases() {
        let a = send_sms().to_document();
        let b = add_sms_sign().to_document();
        let corpus = load_corpus([a.as_str(), b.as_str()]).unwrap();
        assert_eq!(corpus.len(), 2);

        assert!(load_corpus(std::iter::empty()).unwrap().is_empty());

        match load_corpus([a.as_str(), a.as_str()]) {
            Err(CorpusError::AtDocument { doc: 2, source }) => {
                assert!(matches!(*source, CorpusError::DuplicateApi(ref id) if id == "sms.SendSms"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ndjson_error_names_line() {
        let text = format!("{}\n\nnot json\n", send_sms().to_document());
        match Corpus::from_ndjson(&text) {
            Err(CorpusError::AtDocument { doc, .. }) => assert_eq!(doc, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stats_on_sms_tables() {
        let stats = corpus_stats(&sms_corpus());
        // 9 SendSms rows + 8 AddSmsSign rows; 11 distinct names.
        assert_eq!(stats.total_parameter_occurrences, 17);
        assert_eq!(stats.unique_parameter_names, 11);
        assert_eq!(stats.compression_ratio, Some(17.0 / 11.0));
    }

    #[test]
    fn stats_trivial_cases() {
        let stats = corpus_stats(&Corpus::default());
        assert_eq!(stats.total_parameter_occurrences, 0);
        assert_eq!(stats.compression_ratio, None);

        let one = Corpus::from_specs([ApiSpec {
            api_id: "a".into(),
            api_name: "A".into(),
            product: String::new(),
            category: String::new(),
            parameters: vec![ParameterRecord::new("X", Direction::Input)],
        }])
        .unwrap();
        assert_eq!(corpus_stats(&one).compression_ratio, Some(1.0));
    }

    #[test]
    fn paper_scale_ratio_is_plain_division() {
        let ratio = 390_796f64 / 108_882f64;
        assert!((ratio - 3.589).abs() < 5e-4);
    }

    #[test]
    fn resolve_by_id_or_unique_name() {
        let corpus = sms_corpus();
        assert_eq!(
            corpus.resolve("AddSmsSign").unwrap().api_id,
            "sms.AddSmsSign"
        );
        assert_eq!(corpus.resolve("sms.SendSms").unwrap().api_name, "SendSms");
        assert!(corpus.resolve("Nope").is_none());
    }
}
