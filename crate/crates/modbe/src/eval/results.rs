//! Results table: one row per `(n, seed, method)` cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::Method;
use crate::io::{write_text, FormatError};

pub const RESULTS_HEADER: [&str; 6] = ["n", "seed", "method", "selected_k", "regret", "runtime_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    /// Zero-based.
    pub selected: usize,
    pub regret: f64,
    pub runtime_ms: u64,
}

/// Sorts rows by `(n, seed, method)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| (a.n, a.seed, a.method).cmp(&(b.n, b.seed, b.method)));
}

pub fn format_results(rows: &[ResultRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RESULTS_HEADER).expect("in-memory write");
    for r in rows {
        writer
            .write_record([
                r.n.to_string(),
                r.seed.to_string(),
                r.method.name(),
                (r.selected + 1).to_string(),
                r.regret.to_string(),
                r.runtime_ms.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), FormatError> {
    write_text(path, &format_results(rows))
}

/// Mean and standard error of one `(n, method)` group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn mean_stderr(values: &[f64]) -> GroupStats {
    let count = values.len();
    if count == 0 {
        return GroupStats {
            mean: f64::NAN,
            stderr: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let stderr = if count > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        0.0
    };
    GroupStats { mean, stderr, count }
}

/// Regret statistics per `(n, method)`.
pub fn summarize(rows: &[ResultRow]) -> BTreeMap<(usize, Method), GroupStats> {
    let mut groups: BTreeMap<(usize, Method), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.method)).or_default().push(r.regret);
    }
    groups.into_iter().map(|(key, v)| (key, mean_stderr(&v))).collect()
}

/// Plain-text `n  method  mean +- stderr` table.
pub fn format_summary(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{:>8}  {:<10}  {:>12}  {:>10}  {:>5}", "n", "method", "mean_regret", "stderr", "runs").unwrap();
    for ((n, method), s) in summarize(rows) {
        writeln!(
            out,
            "{:>8}  {:<10}  {:>12.6}  {:>10.6}  {:>5}",
            n,
            method.name(),
            s.mean,
            s.stderr,
            s.count
        )
        .unwrap();
    }
    out
}
