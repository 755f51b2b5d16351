//! Selection trace record: one test event per line, then a summary block.
//! Class and step indices are one-based.

use std::fmt::Write;
use std::path::Path;

use modbe_core::{SelectionTrace, TestOutcome};

use super::{write_text, FormatError};

pub const EVENT_HEADER: &str = "k,k_prime,h,loss_g,loss_f,tol,outcome";

pub fn format_trace(trace: &SelectionTrace) -> String {
    let mut out = String::new();
    writeln!(out, "# events").unwrap();
    writeln!(out, "{EVENT_HEADER}").unwrap();
    for e in &trace.events {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.k + 1,
            e.k_prime + 1,
            e.step + 1,
            e.loss_g,
            e.loss_f,
            e.tol,
            e.outcome.as_str()
        )
        .unwrap();
    }
    writeln!(out, "# summary").unwrap();
    for (key, value) in summary_pairs(trace) {
        writeln!(out, "{key} = {value}").unwrap();
    }
    out
}

/// Key/value summary shared by the trace file and the console output.
pub fn summary_pairs(trace: &SelectionTrace) -> Vec<(&'static str, String)> {
    let visited: Vec<String> = trace.visited.iter().map(|k| (k + 1).to_string()).collect();
    vec![
        ("selected_k", (trace.selected + 1).to_string()),
        ("num_classes", trace.num_classes.to_string()),
        ("events", trace.events.len().to_string()),
        ("rejections", trace.rejections().to_string()),
        ("visited", visited.join(" ")),
        ("final_rerun", trace.final_rerun.to_string()),
        ("base_calls", trace.base_calls.to_string()),
        ("erm_calls", trace.erm_calls.to_string()),
        ("n_train", trace.n_train.to_string()),
        ("n_valid", trace.n_valid.to_string()),
        ("seed", trace.seed.to_string()),
    ]
}

/// Parsed event line, used to check written traces.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub k: usize,
    pub k_prime: usize,
    pub step: usize,
    pub loss_g: f64,
    pub loss_f: f64,
    pub tol: f64,
    pub outcome: TestOutcome,
}

pub fn parse_events(text: &str, origin: &str) -> Result<Vec<EventRow>, FormatError> {
    let mut rows = Vec::new();
    let mut in_events = false;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| FormatError::Parse {
            origin: origin.to_string(),
            line: i + 1,
            message,
        };
        let line = line.trim();
        if line == EVENT_HEADER {
            in_events = true;
            continue;
        }
        if line.starts_with('#') {
            if in_events && line == "# summary" {
                break;
            }
            continue;
        }
        if !in_events || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("invalid index `{s}`: {e}")));
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("invalid number `{s}`: {e}")));
        rows.push(EventRow {
            k: int(f[0])?,
            k_prime: int(f[1])?,
            step: int(f[2])?,
            loss_g: num(f[3])?,
            loss_f: num(f[4])?,
            tol: num(f[5])?,
            outcome: match f[6] {
                "keep" => TestOutcome::Keep,
                "reject" => TestOutcome::Reject,
                other => return Err(err(format!("unknown outcome `{other}`"))),
            },
        });
    }
    Ok(rows)
}

pub fn write_trace(path: &Path, trace: &SelectionTrace) -> Result<(), FormatError> {
    write_text(path, &format_trace(trace))
}
