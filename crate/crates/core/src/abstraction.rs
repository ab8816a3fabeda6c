// SPDX-License-Identifier: Apache-2.0

//! Parameter abstraction over logged request values.
//!
//! Values are first mapped shard by shard into a [`ShardSummary`] holding
//! four count maps: substring containment, compressed character-class
//! pattern, length, and raw value. Summaries merge by pointwise addition, so
//! the reducer is associative and commutative with [`ShardSummary::default`]
//! as identity. [`finalize`] turns the merged summary into a
//! [`PatternProfile`].
//!
//! The pattern language maps CJK ideographs to `z`, ASCII lowercase to `x`,
//! ASCII uppercase to `X`, ASCII digits to `d`, and keeps every other
//! character. Runs of the same character are then collapsed, so
//! `SMS_41515455` becomes `XXX_dddddddd` and then `X_d`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest substring considered as a common-string candidate, in chars.
pub const MAX_SUBSTRING_LEN: usize = 32;
pub const DEFAULT_CANDIDATE_CAP: usize = 4096;
pub const EXAMPLE_COUNT: usize = 6;
/// Coverage thresholds, in percent, for the emitted common strings.
pub const COMMON_THRESHOLDS: [u64; 3] = [100, 80, 60];

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("nothing to profile: summary has no values")]
    Empty,
    #[error("grand total {expected} does not match summary total {actual}")]
    TotalMismatch { expected: u64, actual: u64 },
    #[error("log line {line}: {message}")]
    LogFormat { line: usize, message: String },
    #[error("profile document: {0}")]
    Document(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AbstractionError + '_ {
    move |source| AbstractionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn is_cjk_ideograph(c: char) -> bool {
    ('\u{4E00}'..='\u{9FFF}').contains(&c)
}

/// Maps each character to its class symbol; other characters pass through.
pub fn transform(value: &str) -> String {
    value
        .chars()
        .map(|c| match c {
            'a'..='z' => 'x',
            'A'..='Z' => 'X',
            '0'..='9' => 'd',
            c if is_cjk_ideograph(c) => 'z',
            c => c,
        })
        .collect()
}

/// Collapses every maximal run of one repeated character to a single
/// occurrence.
pub fn compress(class_string: &str) -> String {
    let mut out = String::with_capacity(class_string.len());
    let mut last = None;
    for c in class_string.chars() {
        if last != Some(c) {
            out.push(c);
            last = Some(c);
        }
    }
    out
}

pub fn pattern_of(value: &str) -> String {
    compress(&transform(value))
}

/// One shard of the value multiset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueShard {
    pub values: Vec<String>,
}

impl ValueShard {
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ValueShard {
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// Mergeable per-shard statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardSummary {
    /// Candidate substring → number of values containing it.
    pub substring_counts: BTreeMap<String, u64>,
    pub pattern_counts: BTreeMap<String, u64>,
    /// Length in chars → number of values.
    pub length_hist: BTreeMap<usize, u64>,
    pub value_counts: BTreeMap<String, u64>,
    pub total: u64,
    /// Set when some value had more candidate substrings than the cap
    /// allowed; substring counts are then lower bounds.
    pub truncated: bool,
}

impl ShardSummary {
    pub fn is_neutral(&self) -> bool {
        self.total == 0
    }
}

/// Distinct substrings of `value`, at most [`MAX_SUBSTRING_LEN`] chars long,
/// longest first then lexicographic, cut at `cap`. The flag reports whether
/// the cut dropped anything.
fn value_candidates(value: &str, cap: usize) -> (Vec<String>, bool) {
    let bounds: Vec<usize> = value
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(value.len()))
        .collect();
    let n = bounds.len() - 1;
    let mut set = BTreeSet::new();
    for start in 0..n {
        for len in 1..=MAX_SUBSTRING_LEN.min(n - start) {
            set.insert(&value[bounds[start]..bounds[start + len]]);
        }
    }
    let mut subs: Vec<&str> = set.into_iter().collect();
    subs.sort_by(|a, b| {
        b.chars()
            .count()
            .cmp(&a.chars().count())
            .then_with(|| a.cmp(b))
    });
    let truncated = subs.len() > cap;
    subs.truncate(cap);
    (subs.into_iter().map(str::to_string).collect(), truncated)
}

/// Mapper: local features of one shard.
///
/// Substring candidates come from every distinct value of the shard rather
/// than a single representative, so the union of candidates over any
/// partition of the values is the same set. That keeps the merged summary,
/// and hence the profile, independent of how values were sharded.
pub fn map_shard(shard: &ValueShard, candidate_cap: usize) -> ShardSummary {
    let mut summary = ShardSummary::default();
    for v in &shard.values {
        *summary.value_counts.entry(v.clone()).or_default() += 1;
    }
    for (value, &count) in &summary.value_counts {
        *summary.pattern_counts.entry(pattern_of(value)).or_default() += count;
        *summary
            .length_hist
            .entry(value.chars().count())
            .or_default() += count;
        let (subs, truncated) = value_candidates(value, candidate_cap);
        summary.truncated |= truncated;
        for s in subs {
            *summary.substring_counts.entry(s).or_default() += count;
        }
    }
    summary.total = shard.values.len() as u64;
    summary
}

fn add_counts<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
    for (k, c) in from {
        *into.entry(k).or_default() += c;
    }
}

/// Reducer: pointwise sum of every count map.
pub fn merge(mut a: ShardSummary, b: ShardSummary) -> ShardSummary {
    add_counts(&mut a.substring_counts, b.substring_counts);
    add_counts(&mut a.pattern_counts, b.pattern_counts);
    add_counts(&mut a.length_hist, b.length_hist);
    add_counts(&mut a.value_counts, b.value_counts);
    a.total += b.total;
    a.truncated |= b.truncated;
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternProfile {
    pub parameter_pattern: String,
    pub rate: f64,
    pub examples: Vec<String>,
    pub common_100: String,
    pub common_80: String,
    pub common_60: String,
    pub length_hist: BTreeMap<usize, u64>,
}

/// The emitted part of a profile, in output key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub parameter_pattern: String,
    pub rate: f64,
    pub examples: Vec<String>,
    pub common_100: String,
    pub common_80: String,
    pub common_60: String,
}

impl PatternProfile {
    pub fn document(&self) -> ProfileDocument {
        ProfileDocument {
            parameter_pattern: self.parameter_pattern.clone(),
            rate: format_rate(self.rate)
                .parse()
                .expect("formatted rate parses"),
            examples: self.examples.clone(),
            common_100: self.common_100.clone(),
            common_80: self.common_80.clone(),
            common_60: self.common_60.clone(),
        }
    }

    pub fn common(&self, threshold: u64) -> Option<&str> {
        match threshold {
            100 => Some(&self.common_100),
            80 => Some(&self.common_80),
            60 => Some(&self.common_60),
            _ => None,
        }
    }
}

fn count_containing(values: &BTreeMap<String, u64>, needle: &str) -> u64 {
    values
        .iter()
        .filter(|(v, _)| v.contains(needle))
        .map(|(_, c)| c)
        .sum()
}

/// Longest candidate occurring in at least `need` values; ties go to the
/// lexicographically smallest. The count is re-verified against the raw
/// values before a candidate is accepted.
fn longest_common(summary: &ShardSummary, ordered: &[(&str, u64)], need: u64) -> String {
    for &(cand, merged) in ordered {
        if !summary.truncated && merged < need {
            continue;
        }
        if count_containing(&summary.value_counts, cand) >= need {
            return cand.to_string();
        }
    }
    String::new()
}

/// Turns a fully merged summary into the emitted profile.
pub fn finalize(
    summary: &ShardSummary,
    grand_total: u64,
) -> Result<PatternProfile, AbstractionError> {
    if summary.total == 0 {
        return Err(AbstractionError::Empty);
    }
    if grand_total != summary.total {
        return Err(AbstractionError::TotalMismatch {
            expected: grand_total,
            actual: summary.total,
        });
    }
    let mut best: Option<(&str, u64)> = None;
    for (p, &c) in &summary.pattern_counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((p, c));
        }
    }
    let (pattern, count) = best.expect("non-empty summary has a pattern");

    let mut ordered: Vec<(&str, u64)> = summary
        .substring_counts
        .iter()
        .map(|(s, &c)| (s.as_str(), c))
        .collect();
    ordered.sort_by(|a, b| {
        b.0.chars()
            .count()
            .cmp(&a.0.chars().count())
            .then_with(|| a.0.cmp(b.0))
    });

    let total = summary.total;
    let [c100, c80, c60] =
        COMMON_THRESHOLDS.map(|t| longest_common(summary, &ordered, (t * total).div_ceil(100)));

    Ok(PatternProfile {
        parameter_pattern: pattern.to_string(),
        rate: count as f64 / total as f64,
        examples: select_matching(&summary.value_counts, pattern, EXAMPLE_COUNT),
        common_100: c100,
        common_80: c80,
        common_60: c60,
        length_hist: summary.length_hist.clone(),
    })
}

fn select_matching(values: &BTreeMap<String, u64>, pattern: &str, k: usize) -> Vec<String> {
    let mut matching: Vec<(&String, u64)> = values
        .iter()
        .filter(|(v, _)| pattern_of(v) == pattern)
        .map(|(v, &c)| (v, c))
        .collect();
    // Stable sort keeps the BTreeMap's lexicographic order among equal counts.
    matching.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
    matching
        .into_iter()
        .take(k)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Up to `k` distinct values of the profile's dominant pattern, most
/// frequent first, ties lexicographic.
pub fn select_examples(
    values: &BTreeMap<String, u64>,
    profile: &PatternProfile,
    k: usize,
) -> Vec<String> {
    select_matching(values, &profile.parameter_pattern, k)
}

/// Rate with at most three decimals and no trailing zeros.
fn format_rate(rate: f64) -> String {
    let s = format!("{rate:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Renders the profile document with a fixed key order and one-space
/// indentation.
pub fn profile_to_document(profile: &PatternProfile) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!(
        " \"parameter_pattern\": {},\n",
        json_str(&profile.parameter_pattern)
    ));
    out.push_str(&format!(" \"rate\": {},\n", format_rate(profile.rate)));
    if profile.examples.is_empty() {
        out.push_str(" \"examples\": [],\n");
    } else {
        out.push_str(" \"examples\": [\n");
        let items: Vec<String> = profile
            .examples
            .iter()
            .map(|e| format!("  {}", json_str(e)))
            .collect();
        out.push_str(&items.join(",\n"));
        out.push_str("\n ],\n");
    }
    out.push_str(&format!(
        " \"common_100\": {},\n",
        json_str(&profile.common_100)
    ));
    out.push_str(&format!(
        " \"common_80\": {},\n",
        json_str(&profile.common_80)
    ));
    out.push_str(&format!(
        " \"common_60\": {}\n",
        json_str(&profile.common_60)
    ));
    out.push_str("}\n");
    out
}

pub fn parse_profile_document(text: &str) -> Result<ProfileDocument, AbstractionError> {
    Ok(serde_json::from_str(text)?)
}

/// Splits `values` into `shards` contiguous shards, maps them in parallel,
/// and folds the summaries with [`merge`].
pub fn summarize(values: &[String], shards: usize, candidate_cap: usize) -> ShardSummary {
    let shards = shards.max(1);
    let chunk = values.len().div_ceil(shards).max(1);
    values
        .par_chunks(chunk)
        .map(|c| map_shard(&ValueShard { values: c.to_vec() }, candidate_cap))
        .reduce(ShardSummary::default, merge)
}

pub fn profile_values(
    values: &[String],
    shards: usize,
    candidate_cap: usize,
) -> Result<PatternProfile, AbstractionError> {
    let summary = summarize(values, shards, candidate_cap);
    finalize(&summary, values.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub api_name: String,
    pub param_name: String,
    pub value: String,
}

/// Parses `api_name TAB param_name TAB raw_value` lines. The value is
/// everything after the second tab and may be empty. Blank lines are
/// skipped.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, AbstractionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(api), Some(param), Some(value)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(AbstractionError::LogFormat {
                line: i + 1,
                message: "expected api_name<TAB>param_name<TAB>value".into(),
            });
        };
        if api.is_empty() || param.is_empty() {
            return Err(AbstractionError::LogFormat {
                line: i + 1,
                message: "empty api or parameter name".into(),
            });
        }
        out.push(LogRecord {
            api_name: api.to_string(),
            param_name: param.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupScope {
    /// One profile per parameter name across all APIs.
    #[default]
    Parameter,
    /// One profile per `(api_name, parameter name)`.
    ApiParameter,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub api_name: Option<String>,
    pub param_name: String,
}

fn escape_component(s: &str) -> String {
    let mut out = String::new();
    for (i, b) in s.bytes().enumerate() {
        let keep = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0);
        if keep {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn unescape_component(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

impl GroupKey {
    /// `<param>.json` for global groups, `<api>/<param>.json` for
    /// API-scoped ones; components are percent-escaped.
    pub fn relative_path(&self) -> PathBuf {
        let file = format!("{}.json", escape_component(&self.param_name));
        match &self.api_name {
            Some(api) => Path::new(&escape_component(api)).join(file),
            None => PathBuf::from(file),
        }
    }

    fn from_components(dir: Option<&str>, file: &str) -> Option<GroupKey> {
        let stem = file.strip_suffix(".json")?;
        Some(GroupKey {
            api_name: match dir {
                Some(d) => Some(unescape_component(d)?),
                None => None,
            },
            param_name: unescape_component(stem)?,
        })
    }
}

/// Groups records by scope and profiles each group.
pub fn abstract_log(
    records: &[LogRecord],
    scope: GroupScope,
    shards: usize,
    candidate_cap: usize,
) -> Result<BTreeMap<GroupKey, PatternProfile>, AbstractionError> {
    let mut groups: BTreeMap<GroupKey, Vec<String>> = BTreeMap::new();
    for r in records {
        let key = GroupKey {
            api_name: match scope {
                GroupScope::Parameter => None,
                GroupScope::ApiParameter => Some(r.api_name.clone()),
            },
            param_name: r.param_name.clone(),
        };
        groups.entry(key).or_default().push(r.value.clone());
    }
    groups
        .into_iter()
        .map(|(k, values)| Ok((k, profile_values(&values, shards, candidate_cap)?)))
        .collect()
}

/// Writes one document per group under `dir`; returns the written paths.
pub fn write_profile_dir(
    dir: &Path,
    profiles: &BTreeMap<GroupKey, PatternProfile>,
) -> Result<Vec<PathBuf>, AbstractionError> {
    let mut written = Vec::new();
    for (key, profile) in profiles {
        let path = dir.join(key.relative_path());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, profile_to_document(profile)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a directory produced by [`write_profile_dir`].
pub fn read_profile_dir(
    dir: &Path,
) -> Result<BTreeMap<GroupKey, ProfileDocument>, AbstractionError> {
    let mut out = BTreeMap::new();
    let mut read_file =
        |sub: Option<&str>, path: &Path, name: &str| -> Result<(), AbstractionError> {
            if let Some(key) = GroupKey::from_components(sub, name) {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                let doc = parse_profile_document(&text)?;
                out.insert(key, doc);
            }
            Ok(())
        };
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_dir() {
            for inner in fs::read_dir(&path).map_err(io_err(&path))? {
                let inner = inner.map_err(io_err(&path))?;
                let inner_name = inner.file_name().to_string_lossy().into_owned();
                if inner.path().is_file() {
                    read_file(Some(&name), &inner.path(), &inner_name)?;
                }
            }
        } else {
            read_file(None, &path, &name)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform("123"), "ddd");
        assert_eq!(transform("SMS_41515455"), "XXX_dddddddd");
        assert_eq!(transform(""), "");
        assert_eq!(transform("短信Ab9-é"), "zzXxd-é");
    }

    #[test]
    fn compress_examples() {
        assert_eq!(compress("ddd"), "d");
        assert_eq!(compress("XXX_dddddddd"), "X_d");
        assert_eq!(compress("XxXx"), "XxXx");
        assert_eq!(compress("d--d"), "d-d");
        assert_eq!(compress(""), "");
    }

    #[test]
    fn map_two_sms_values() {
        let s = map_shard(&ValueShard::new(["SMS_1", "SMS_22"]), DEFAULT_CANDIDATE_CAP);
        assert_eq!(s.pattern_counts, BTreeMap::from([("X_d".to_string(), 2)]));
        assert_eq!(s.length_hist, BTreeMap::from([(5, 1), (6, 1)]));
        assert_eq!(s.substring_counts["SMS_"], 2);
        assert_eq!(s.substring_counts["SMS_2"], 1);
        // "22" contains "2" once per value, not twice.
        assert_eq!(s.substring_counts["2"], 1);
        assert_eq!(s.total, 2);
        assert!(!s.truncated);
    }

    #[test]
    fn empty_shard_is_neutral() {
        let s = map_shard(&ValueShard::default(), 10);
        assert_eq!(s, ShardSummary::default());
        assert!(matches!(finalize(&s, 0), Err(AbstractionError::Empty)));
    }

    #[test]
    fn count_of_dominant_pattern_in_thousand_values() {
        let mut values = Vec::new();
        for i in 0..994 {
            values.push(format!("SMS_{}", 1000 + i * 7));
        }
        for i in 0..6 {
            values.push(format!("v{i}x"));
        }
        let s = map_shard(&ValueShard { values }, DEFAULT_CANDIDATE_CAP);
        assert_eq!(s.pattern_counts["X_d"], 994);
        assert_eq!(s.pattern_counts["xdx"], 6);
    }

    #[test]
    fn merge_identity_and_conservation() {
        let a = map_shard(&ValueShard::new(["SMS_1", "abc", "abc"]), 64);
        assert_eq!(merge(a.clone(), ShardSummary::default()), a);
        assert_eq!(merge(ShardSummary::default(), a.clone()), a);

        let values: Vec<String> = (0..1000).map(|i| format!("v{}", i % 37)).collect();
        let total = values
            .chunks(250)
            .map(|c| map_shard(&ValueShard { values: c.to_vec() }, 64))
            .fold(ShardSummary::default(), merge)
            .total;
        assert_eq!(total, 1000);
    }

    #[test]
    fn finalize_identical_values() {
        let values = vec!["abc".to_string(); 10];
        let p = profile_values(&values, 3, DEFAULT_CANDIDATE_CAP).unwrap();
        assert_eq!(p.parameter_pattern, "x");
        assert_eq!(p.rate, 1.0);
        assert_eq!(p.common_100, "abc");
        assert_eq!(p.examples, vec!["abc".to_string()]);
    }

    #[test]
    fn finalize_rejects_wrong_grand_total() {
        let s = map_shard(&ValueShard::new(["a"]), 4);
        assert!(matches!(
            finalize(&s, 2),
            Err(AbstractionError::TotalMismatch { .. })
        ));
    }

    #[test]
    fn pattern_ties_go_to_smallest() {
        let p = profile_values(&strings(&["a", "A", "1"]), 1, 16).unwrap();
        // "1" → "d", "A" → "X", "a" → "x"; all count 1, "X" < "d" < "x".
        assert_eq!(p.parameter_pattern, "X");
        assert!((p.rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds_use_ceiling() {
        // 5 values: 80% needs 4, 60% needs 3.
        let p = profile_values(&strings(&["abcd", "abcd", "abcd", "abxx", "qq"]), 1, 64).unwrap();
        assert_eq!(p.common_100, "");
        assert_eq!(p.common_80, "ab");
        assert_eq!(p.common_60, "abcd");
    }

    #[test]
    fn rate_is_modal_frequency_by_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let alphabet: Vec<char> = "aZ9_".chars().collect();
        let values: Vec<String> = (0..300)
            .map(|_| {
                let n = rng.random_range(1..5);
                (0..n)
                    .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                    .collect()
            })
            .collect();
        let p = profile_values(&values, 4, 64).unwrap();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for v in &values {
            let classes: Vec<char> = v
                .chars()
                .map(|c| {
                    if c.is_ascii_lowercase() {
                        'x'
                    } else if c.is_ascii_uppercase() {
                        'X'
                    } else if c.is_ascii_digit() {
                        'd'
                    } else {
                        c
                    }
                })
                .collect();
            let mut pat = String::new();
            for c in classes {
                if !pat.ends_with(c) {
                    pat.push(c);
                }
            }
            *counts.entry(pat).or_default() += 1;
        }
        let modal = counts.values().copied().max().unwrap();
        assert!((p.rate - modal as f64 / 300.0).abs() < 1e-15);
        assert_eq!(counts[&p.parameter_pattern], modal);
    }

    #[test]
    fn select_examples_filters_to_dominant_pattern() {
        let mut values = Vec::new();
        for i in 0..90 {
            values.push(["alpha", "beta", "gamma", "delta"][i % 4].to_string());
        }
        for i in 0..10 {
            values.push(format!("X{i}"));
        }
        let summary = summarize(&values, 3, 64);
        let p = finalize(&summary, 100).unwrap();
        assert_eq!(p.parameter_pattern, "x");
        let ex = select_examples(&summary.value_counts, &p, 10);
        assert_eq!(ex, strings(&["alpha", "beta", "delta", "gamma"]));
        assert!(ex.iter().all(|e| pattern_of(e) == "x"));
        assert_eq!(
            select_examples(&summary.value_counts, &p, 2),
            strings(&["alpha", "beta"])
        );

        let none = PatternProfile {
            parameter_pattern: "zzz".into(),
            ..p
        };
        assert!(select_examples(&summary.value_counts, &none, 3).is_empty());
    }

    #[test]
    fn truncated_candidates_still_verified() {
        // cap 1 keeps only the whole value per value, so "ab" is never a
        // candidate and counts of longer strings must be rescanned.
        let p = profile_values(&strings(&["abc", "abd", "abc"]), 1, 1).unwrap();
        assert_eq!(p.common_100, "");
        assert_eq!(p.common_60, "abc");
    }

    #[test]
    fn document_layout() {
        let p = PatternProfile {
            parameter_pattern: "X_d".into(),
            rate: 0.994,
            examples: strings(&["SMS_1", "SMS_2"]),
            common_100: String::new(),
            common_80: "SMS_".into(),
            common_60: "SMS_".into(),
            length_hist: BTreeMap::new(),
        };
        let doc = profile_to_document(&p);
        assert_eq!(
            doc,
            "{\n \"parameter_pattern\": \"X_d\",\n \"rate\": 0.994,\n \"examples\": [\n  \"SMS_1\",\n  \"SMS_2\"\n ],\n \"common_100\": \"\",\n \"common_80\": \"SMS_\",\n \"common_60\": \"SMS_\"\n}\n"
        );
        assert_eq!(parse_profile_document(&doc).unwrap(), p.document());

        let empty = PatternProfile {
            examples: vec![],
            common_80: String::new(),
            common_60: String::new(),
            rate: 1.0,
            ..p
        };
        let doc = profile_to_document(&empty);
        assert!(doc.contains("\"rate\": 1,"));
        assert!(doc.contains("\"common_80\": \"\""));
        assert_eq!(parse_profile_document(&doc).unwrap(), empty.document());
    }

    #[test]
    fn rate_formatting() {
        assert_eq!(format_rate(0.994), "0.994");
        assert_eq!(format_rate(0.5), "0.5");
        assert_eq!(format_rate(1.0), "1");
        assert_eq!(format_rate(0.0), "0");
        assert_eq!(format_rate(2.0 / 3.0), "0.667");
    }

    #[test]
    fn log_parsing() {
        let recs =
            parse_log("SendSms\tTemplateCode\tSMS_1\nSendSms\tOutId\t\n\nA\tB\tx\ty\n").unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1].value, "");
        assert_eq!(recs[2].value, "x\ty");
        match parse_log("ok\tok\tok\nbroken line\n") {
            Err(AbstractionError::LogFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_paths_round_trip() {
        let keys = [
            GroupKey {
                api_name: None,
                param_name: "Tag.1.Key".into(),
            },
            GroupKey {
                api_name: Some("SendSms".into()),
                param_name: "a/b%c".into(),
            },
            GroupKey {
                api_name: Some(".hidden".into()),
                param_name: "短信".into(),
            },
        ];
        for key in keys {
            let path = key.relative_path();
            let comps: Vec<String> = path
                .iter()
                .map(|c| c.to_string_lossy().into_owned())
                .collect();
            let back = match comps.as_slice() {
                [f] => GroupKey::from_components(None, f),
                [d, f] => GroupKey::from_components(Some(d), f),
                _ => None,
            };
            assert_eq!(back, Some(key));
        }
    }

    #[test]
    fn abstract_log_scopes() {
        let recs = parse_log("A\tP\tx1\nB\tP\tx2\nB\tQ\tY\n").unwrap();
        let global = abstract_log(&recs, GroupScope::Parameter, 2, 64).unwrap();
        assert_eq!(global.len(), 2);
        let per_api = abstract_log(&recs, GroupScope::ApiParameter, 2, 64).unwrap();
        assert_eq!(per_api.len(), 3);
        assert!(per_api.contains_key(&GroupKey {
            api_name: Some("B".into()),
            param_name: "P".into()
        }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn value() -> impl Strategy<Value = String> {
            "[aAb1_中-]{0,6}"
        }

        proptest! {
            #[test]
            fn transform_preserves_length(v in "\\PC{0,20}") {
                prop_assert_eq!(transform(&v).chars().count(), v.chars().count());
            }

            #[test]
            fn compress_is_idempotent(v in "\\PC{0,20}") {
                let once = compress(&transform(&v));
                prop_assert_eq!(compress(&once), once);
            }

            #[test]
            fn merge_commutes_and_associates(
                a in prop::collection::vec(value(), 0..12),
                b in prop::collection::vec(value(), 0..12),
                c in prop::collection::vec(value(), 0..12),
            ) {
                let m = |v: &Vec<String>| map_shard(&ValueShard { values: v.clone() }, 64);
                let (sa, sb, sc) = (m(&a), m(&b), m(&c));
                prop_assert_eq!(merge(sa.clone(), sb.clone()), merge(sb.clone(), sa.clone()));
                prop_assert_eq!(
                    merge(merge(sa.clone(), sb.clone()), sc.clone()),
                    merge(sa.clone(), merge(sb.clone(), sc.clone()))
                );
                let all: Vec<String> = a.iter().chain(&b).chain(&c).cloned().collect();
                prop_assert_eq!(merge(merge(sa, sb), sc), m(&all));
            }

            #[test]
            fn profile_invariants(values in prop::collection::vec(value(), 1..40), shards in 1usize..9) {
                let p = profile_values(&values, shards, 64).unwrap();
                prop_assert_eq!(&p, &profile_values(&values, 1, 64).unwrap());
                prop_assert!((0.0..=1.0).contains(&p.rate));
                let n = values.len();
                for t in COMMON_THRESHOLDS {
                    let common = p.common(t).unwrap();
                    let hits = values.iter().filter(|v| v.contains(common)).count();
                    prop_assert!(hits * 100 >= t as usize * n);
                }
                let matching = values.iter().filter(|v| pattern_of(v) == p.parameter_pattern).count();
                prop_assert_eq!(p.rate, matching as f64 / n as f64);
                for e in &p.examples {
                    prop_assert_eq!(pattern_of(e), p.parameter_pattern.clone());
                }
            }
        }
    }
}
