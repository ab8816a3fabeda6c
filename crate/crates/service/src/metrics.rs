// SPDX-License-Identifier: Apache-2.0

//! Acceptance-rate arithmetic over recorded events.
//!
//! `rate = valid / total`, where an event is valid when the engineer picked
//! one of the shown candidates. Windows are half-open `[from, to)` in UTC.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use serde::Serialize;

use crate::events::RecommendationEvent;
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceStats {
    pub valid: u64,
    pub total: u64,
    /// `None` when `total == 0`; serialized as `null`.
    pub rate: Option<f64>,
}

impl AcceptanceStats {
    pub fn new(valid: u64, total: u64) -> AcceptanceStats {
        AcceptanceStats {
            valid,
            total,
            rate: (total > 0).then(|| valid as f64 / total as f64),
        }
    }
}

impl Default for AcceptanceStats {
    fn default() -> Self {
        AcceptanceStats::new(0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Window {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl Window {
    pub fn new(
        from: Option<DateTime<Utc>>,
        to: Option<DateTime<Utc>>,
    ) -> Result<Window, ServiceError> {
        if let (Some(f), Some(t)) = (from, to) {
            if t < f {
                return Err(ServiceError::Argument(format!(
                    "window end {t} precedes start {f}"
                )));
            }
        }
        Ok(Window { from, to })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t < e)
    }
}

/// Parses an RFC 3339 instant or a bare `YYYY-MM-DD` date (midnight UTC).
pub fn parse_instant(s: &str) -> Result<DateTime<Utc>, ServiceError> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| Utc.from_utc_datetime(&d.and_time(NaiveTime::MIN)))
        .map_err(|_| {
            ServiceError::Argument(format!(
                "cannot parse `{s}` as an RFC 3339 instant or YYYY-MM-DD date"
            ))
        })
}

pub fn acceptance_rate(events: &[RecommendationEvent], window: &Window) -> AcceptanceStats {
    let mut valid = 0;
    let mut total = 0;
    for e in events.iter().filter(|e| window.contains(e.timestamp)) {
        total += 1;
        valid += u64::from(e.chosen.is_some());
    }
    AcceptanceStats::new(valid, total)
}

/// Acceptance per candidate source, keyed by the fingerprint's kind tag.
///
/// An event counts towards a kind's total when at least one shown candidate
/// came from that source, and towards its valid count when the chosen one
/// did.
pub fn acceptance_by_kind(
    events: &[RecommendationEvent],
    window: &Window,
) -> BTreeMap<String, AcceptanceStats> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for e in events.iter().filter(|e| window.contains(e.timestamp)) {
        let mut kinds: Vec<&str> = e.shown.iter().filter_map(|f| kind_of(f)).collect();
        kinds.sort_unstable();
        kinds.dedup();
        for k in kinds {
            counts.entry(k.to_string()).or_default().1 += 1;
        }
        if let Some(k) = e.chosen.as_deref().and_then(kind_of) {
            counts.entry(k.to_string()).or_default().0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (v, t))| (k, AcceptanceStats::new(v, t)))
        .collect()
}

fn kind_of(fingerprint: &str) -> Option<&str> {
    fingerprint.split_once(':').map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeekBucket {
    /// ISO week label, e.g. `2026-W03`.
    pub week: String,
    /// Monday 00:00 UTC that opens the week.
    pub start: DateTime<Utc>,
    #[serde(flatten)]
    pub stats: AcceptanceStats,
}

fn week_start(t: DateTime<Utc>) -> NaiveDate {
    let d = t.date_naive();
    d - Duration::days(i64::from(d.weekday().num_days_from_monday()))
}

/// One bucket per ISO week touching the window, empty weeks included.
///
/// Unbounded window ends default to the earliest and latest event. With no
/// events and an unbounded window the series is empty.
pub fn weekly_series(events: &[RecommendationEvent], window: &Window) -> Vec<WeekBucket> {
    let inside: Vec<&RecommendationEvent> = events
        .iter()
        .filter(|e| window.contains(e.timestamp))
        .collect();
    let first = window
        .from
        .or_else(|| inside.iter().map(|e| e.timestamp).min());
    // `to` is exclusive, so the last week is the one holding the instant before it.
    let last = window
        .to
        .map(|t| t - Duration::nanoseconds(1))
        .or_else(|| inside.iter().map(|e| e.timestamp).max());
    let (Some(first), Some(last)) = (first, last) else {
        return Vec::new();
    };
    if last < first {
        return Vec::new();
    }
    let mut counts: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
    let mut monday = week_start(first);
    let end = week_start(last);
    while monday <= end {
        counts.insert(monday, (0, 0));
        monday += Duration::days(7);
    }
    for e in inside {
        let c = counts.entry(week_start(e.timestamp)).or_default();
        c.1 += 1;
        c.0 += u64::from(e.chosen.is_some());
    }
    counts
        .into_iter()
        .map(|(monday, (v, t))| {
            let iso = monday.iso_week();
            WeekBucket {
                week: format!("{}-W{:02}", iso.year(), iso.week()),
                start: Utc.from_utc_datetime(&monday.and_time(NaiveTime::MIN)),
                stats: AcceptanceStats::new(v, t),
            }
        })
        .collect()
}
