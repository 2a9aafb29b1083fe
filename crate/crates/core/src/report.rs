//! Sanitizer log parsing, token-based deduplication, and the results
//! summary.
//!
//! Deduplication tokens (`DEDUP_TOKEN:` lines, stack-trace derived) are
//! compared as exact strings and grouped globally across targets within
//! a repetition, so two targets reaching the same bug collapse into one
//! record. Per-repetition counts are averaged across repetitions for the
//! summary row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::{ReplayVerdict, RunOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BugKind {
    Crash,
    Leak,
}

/// One parsed sanitizer error log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitizerReport {
    pub kind: BugKind,
    /// Verbatim text after the `DEDUP_TOKEN: ` prefix.
    pub dedup_token: String,
    pub raw_log: String,
    pub target_id: String,
    pub input_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("no DEDUP_TOKEN line in sanitizer log for `{input}` (is the symbolizer configured?)")]
    NoTokenFound { input: String },
    #[error("unrecognized sanitizer log for `{input}`")]
    UnrecognizedLog { input: String },
}

const LEAK_HEADER: &str = "ERROR: LeakSanitizer: detected memory leaks";
const ASAN_HEADER: &str = "ERROR: AddressSanitizer:";
const TOKEN_PREFIX: &str = "DEDUP_TOKEN: ";

/// Parse one complete sanitizer error log.
///
/// The kind comes from the log header (leak detector vs address
/// sanitizer); the token is taken verbatim from the first `DEDUP_TOKEN:`
/// line. A recognized log without a token means the sanitizer could not
/// symbolize its stack traces.
pub fn parse_sanitizer_output(
    raw: &str,
    target_id: &str,
    input_path: &Path,
) -> Result<SanitizerReport, ReportError> {
    let kind = if raw.contains(LEAK_HEADER) {
        BugKind::Leak
    } else if raw.contains(ASAN_HEADER) {
        BugKind::Crash
    } else {
        return Err(ReportError::UnrecognizedLog {
            input: input_path.display().to_string(),
        });
    };

    let token = raw
        .lines()
        .find_map(|line| line.strip_prefix(TOKEN_PREFIX))
        .map(str::to_string)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ReportError::NoTokenFound {
            input: input_path.display().to_string(),
        })?;

    Ok(SanitizerReport {
        kind,
        dedup_token: token,
        raw_log: raw.to_string(),
        target_id: target_id.to_string(),
        input_path: input_path.to_path_buf(),
    })
}

/// Parse the logs of every crash input in a batch of outcomes, grouped
/// by repetition. Unparseable logs are returned separately so callers
/// can surface them without losing the rest.
#[allow(clippy::type_complexity)]
pub fn reports_from_outcomes(
    outcomes: &[RunOutcome],
) -> (BTreeMap<u32, Vec<SanitizerReport>>, Vec<(PathBuf, ReportError)>) {
    let mut by_rep: BTreeMap<u32, Vec<SanitizerReport>> = BTreeMap::new();
    let mut errors = Vec::new();
    for outcome in outcomes {
        let bucket = by_rep.entry(outcome.repetition).or_default();
        for (input, log) in outcome.crash_input_paths.iter().zip(&outcome.sanitizer_logs) {
            match parse_sanitizer_output(log, &outcome.target_id, input) {
                Ok(report) => bucket.push(report),
                Err(err) => errors.push((input.clone(), err)),
            }
        }
    }
    (by_rep, errors)
}

/// One deduplicated bug within a repetition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub dedup_token: String,
    pub kind: BugKind,
    /// Target and repetition of the first report carrying this token.
    pub first_seen: (String, u32),
    pub reproduced: bool,
}

/// Collapse reports to one [`BugRecord`] per distinct token.
///
/// Only inputs whose replay verdict is `Reproduced` count; grouping is
/// global across targets (two targets finding the same bug produce one
/// record). The kind is taken from the first report of each group.
pub fn dedup(
    reports: &[SanitizerReport],
    verdicts: &BTreeMap<PathBuf, ReplayVerdict>,
    repetition: u32,
) -> Vec<BugRecord> {
    let mut records: Vec<BugRecord> = Vec::new();
    for report in reports {
        if verdicts.get(&report.input_path) != Some(&ReplayVerdict::Reproduced) {
            continue;
        }
        if records.iter().any(|r| r.dedup_token == report.dedup_token) {
            continue;
        }
        records.push(BugRecord {
            dedup_token: report.dedup_token.clone(),
            kind: report.kind,
            first_seen: (report.target_id.clone(), repetition),
            reproduced: true,
        });
    }
    records
}

/// Inputs to [`summarize`] for one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionData {
    pub repetition: u32,
    /// All parsed reports of the repetition (pre-replay).
    pub reports: Vec<SanitizerReport>,
    pub bug_records: Vec<BugRecord>,
}

/// One row of the results summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub method_label: String,
    pub target_count: usize,
    /// Mean count of distinct crashing inputs per repetition.
    pub distinct_bug_inputs: f64,
    pub unique_crashes: f64,
    pub unique_leaks: f64,
    pub total_bugs: f64,
    pub bugs_per_target: f64,
}

/// Average per-repetition counts into a results row.
pub fn summarize(
    per_repetition: &[RepetitionData],
    target_count: usize,
    method_label: &str,
) -> ResultsRow {
    assert!(!per_repetition.is_empty(), "at least one repetition required");
    let reps = per_repetition.len() as f64;
    let mean = |f: &dyn Fn(&RepetitionData) -> usize| -> f64 {
        per_repetition.iter().map(|r| f(r) as f64).sum::<f64>() / reps
    };

    let distinct_bug_inputs = mean(&|r| r.reports.len());
    let unique_crashes = mean(&|r| r.bug_records.iter().filter(|b| b.kind == BugKind::Crash).count());
    let unique_leaks = mean(&|r| r.bug_records.iter().filter(|b| b.kind == BugKind::Leak).count());
    let total_bugs = unique_crashes + unique_leaks;

    ResultsRow {
        method_label: method_label.to_string(),
        target_count,
        distinct_bug_inputs,
        unique_crashes,
        unique_leaks,
        total_bugs,
        bugs_per_target: total_bugs / target_count as f64,
    }
}

/// Build a row directly from averaged per-kind counts (for reporting
/// over externally aggregated data).
pub fn row_from_means(
    method_label: &str,
    target_count: usize,
    distinct_bug_inputs: f64,
    unique_crashes: f64,
    unique_leaks: f64,
) -> ResultsRow {
    let total_bugs = unique_crashes + unique_leaks;
    ResultsRow {
        method_label: method_label.to_string(),
        target_count,
        distinct_bug_inputs,
        unique_crashes,
        unique_leaks,
        total_bugs,
        bugs_per_target: total_bugs / target_count as f64,
    }
}

/// Render rows as an aligned text table. `bugs_per_target` is rounded to
/// two decimals for display.
pub fn render_table(rows: &[ResultsRow]) -> String {
    let headers = [
        "Run",
        "Targets",
        "Distinct Bug Inputs",
        "Unique Crashes",
        "Unique Leaks",
        "Total Bugs",
        "Bugs/Target",
    ];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.method_label.clone(),
                r.target_count.to_string(),
                format!("{:.1}", r.distinct_bug_inputs),
                format!("{:.1}", r.unique_crashes),
                format!("{:.1}", r.unique_leaks),
                format!("{:.1}", r.total_bugs),
                format!("{:.2}", r.bugs_per_target),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }

    let mut out = String::new();
    for (i, header) in headers.iter().enumerate() {
        if i > 0 {
            out.push_str("  ");
        }
        if i == 0 {
            write!(out, "{:<width$}", header, width = widths[i]).unwrap();
        } else {
            write!(out, "{:>width$}", header, width = widths[i]).unwrap();
        }
    }
    out.push('\n');
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                write!(out, "{:<width$}", cell, width = widths[i]).unwrap();
            } else {
                write!(out, "{:>width$}", cell, width = widths[i]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Machine-readable companion to [`render_table`]: comma-delimited with
/// a header row, same column set.
pub fn render_delimited(rows: &[ResultsRow]) -> String {
    let mut out = String::from(
        "method,targets,distinct_bug_inputs,unique_crashes,unique_leaks,total_bugs,bugs_per_target\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.2}",
            r.method_label,
            r.target_count,
            r.distinct_bug_inputs,
            r.unique_crashes,
            r.unique_leaks,
            r.total_bugs,
            r.bugs_per_target
        )
        .unwrap();
    }
    out
}
