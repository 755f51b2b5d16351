//! Sweep configuration: `key = value` lines, `#` comments.
//!
//! ```text
//! instance = chain            # chain | grid | variance-bias | finite-absorbing | cb
//! n_list = 100, 1000, 10000
//! seeds = 0..20               # half-open range, or a list
//! methods = modbe, holdout, oracle, fixed-k
//! schedule = practical        # theoretical | practical | constant:<tol>
//! mu = uniform-mu             # tabular instances only; default is the instance's own
//! gamma = 0                   # cb only
//! delta = 0.1
//! output = results.csv
//! timing = false              # record wall-clock runtime_ms
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use modbe_core::ScheduleMode;

use super::instances::MuSpec;
use crate::io::{read_text, FormatError, Lines};

/// A comparison method in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Modbe,
    Holdout,
    Oracle,
    /// Base algorithm on class `k` (zero-based).
    Fixed(usize),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Modbe => "modbe".into(),
            Method::Holdout => "holdout".into(),
            Method::Oracle => "oracle".into(),
            Method::Fixed(k) => format!("fixed-{}", k + 1),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses a schedule name.
pub fn parse_schedule(s: &str) -> Result<ScheduleMode, String> {
    match s {
        "theoretical" => Ok(ScheduleMode::Theoretical),
        "practical" => Ok(ScheduleMode::Practical),
        _ => {
            let v = s
                .strip_prefix("constant:")
                .ok_or_else(|| format!("unknown schedule `{s}` (theoretical, practical, constant:<tol>)"))?;
            let v: f64 = v.parse().map_err(|e| format!("invalid constant tolerance `{v}`: {e}"))?;
            if v.is_nan() {
                return Err("constant tolerance must not be NaN".into());
            }
            Ok(ScheduleMode::Constant(v))
        }
    }
}

pub fn schedule_name(mode: ScheduleMode) -> String {
    match mode {
        ScheduleMode::Theoretical => "theoretical".into(),
        ScheduleMode::Practical => "practical".into(),
        ScheduleMode::Constant(v) => format!("constant:{v}"),
    }
}

/// Method list entry before the class count is known; `fixed-k` expands to
/// every class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    One(Method),
    AllFixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: String,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSpec>,
    pub schedule: ScheduleMode,
    /// Overrides the instance's own data distribution.
    pub mu: Option<MuSpec>,
    pub gamma: f64,
    pub delta: f64,
    pub output: Option<PathBuf>,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            instance: "chain".into(),
            n_list: vec![100, 1000, 10000],
            seeds: (0..20).collect(),
            methods: vec![
                MethodSpec::One(Method::Modbe),
                MethodSpec::One(Method::Holdout),
                MethodSpec::One(Method::Oracle),
                MethodSpec::AllFixed,
            ],
            schedule: ScheduleMode::Practical,
            mu: None,
            gamma: 0.0,
            delta: 0.1,
            output: None,
            timing: false,
        }
    }
}

const INSTANCES: [&str; 5] = ["chain", "grid", "variance-bias", "finite-absorbing", "cb"];

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("invalid value `{t}`: {e}")))
        .collect()
}

fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("invalid range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("invalid range end: {e}"))?;
        return Ok((a..b).collect());
    }
    parse_list(value)
}

fn parse_methods(value: &str) -> Result<Vec<MethodSpec>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "modbe" => Ok(MethodSpec::One(Method::Modbe)),
            "holdout" => Ok(MethodSpec::One(Method::Holdout)),
            "oracle" => Ok(MethodSpec::One(Method::Oracle)),
            "fixed-k" => Ok(MethodSpec::AllFixed),
            _ => match t.strip_prefix("fixed-").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(MethodSpec::One(Method::Fixed(k - 1))),
                _ => Err(format!("unknown method `{t}` (modbe, holdout, oracle, fixed-k, fixed-<k>)")),
            },
        })
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, FormatError> {
        let mut config = ExperimentConfig::default();
        let mut lines = Lines::new(text, origin);
        let mut seen = HashSet::new();
        while let Some(line) = lines.next() {
            let err = |message: String| lines.error(line.number, message);
            let (key, value) = line
                .text
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            match key {
                "instance" => {
                    if !INSTANCES.contains(&value) {
                        return Err(err(format!("unknown instance `{value}` ({})", INSTANCES.join(", "))));
                    }
                    config.instance = value.to_string();
                }
                "n_list" => {
                    config.n_list = parse_list(value).map_err(err)?;
                    if let Some(n) = config.n_list.iter().find(|&&n| n < 5) {
                        return Err(err(format!("n values must be at least 5, found {n}")));
                    }
                }
                "seeds" => {
                    config.seeds = parse_seeds(value).map_err(err)?;
                    let distinct: HashSet<_> = config.seeds.iter().collect();
                    if distinct.len() != config.seeds.len() {
                        return Err(err("seeds must be distinct".into()));
                    }
                }
                "methods" => config.methods = parse_methods(value).map_err(err)?,
                "schedule" => config.schedule = parse_schedule(value).map_err(err)?,
                "mu" => config.mu = Some(value.parse().map_err(err)?),
                "gamma" => {
                    config.gamma = value.parse().map_err(|e| err(format!("invalid gamma `{value}`: {e}")))?;
                    if !(0.0..1.0).contains(&config.gamma) {
                        return Err(err("gamma must lie in [0, 1)".into()));
                    }
                }
                "delta" => {
                    config.delta = value.parse().map_err(|e| err(format!("invalid delta `{value}`: {e}")))?;
                    if !(config.delta > 0.0 && config.delta <= (-1.0f64).exp()) {
                        return Err(err("delta must lie in (0, 1/e]".into()));
                    }
                }
                "output" => config.output = Some(PathBuf::from(value)),
                "timing" => config.timing = value.parse().map_err(|e| err(format!("invalid timing flag `{value}`: {e}")))?,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
            if config.n_list.is_empty() || config.seeds.is_empty() || config.methods.is_empty() {
                return Err(err(format!("`{key}` must not be empty")));
            }
        }
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    /// Expands `fixed-k` for `num_classes` classes, drops duplicates and
    /// orders methods canonically.
    pub fn expand_methods(&self, num_classes: usize) -> Result<Vec<Method>, String> {
        let mut out = Vec::new();
        for spec in &self.methods {
            match *spec {
                MethodSpec::One(Method::Fixed(k)) if k >= num_classes => {
                    return Err(format!("method fixed-{} exceeds the {num_classes} classes", k + 1));
                }
                MethodSpec::One(m) => out.push(m),
                MethodSpec::AllFixed => out.extend((0..num_classes).map(Method::Fixed)),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}
