//! Dataset CSV: optional `# key: value` metadata lines, then a
//! `h,x,a,r,x_next` header and one transition per row with one-based `h`.

use std::fmt::Write as _;
use std::path::Path;

use modbe_core::{DatasetMeta, OfflineDataset, Transition};

use super::{read_text, write_text, FormatError};

const HEADER: [&str; 5] = ["h", "x", "a", "r", "x_next"];

fn parse_meta(text: &str) -> DatasetMeta {
    let mut meta = DatasetMeta::default();
    for line in text.lines() {
        let Some(body) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = body.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "seed" => meta.seed = value.parse().ok(),
            "generator" => meta.generator = value.to_string(),
            "mu" => meta.mu_spec = value.to_string(),
            "concentrability" => meta.concentrability = value.parse().ok(),
            _ => {}
        }
    }
    meta
}

pub fn parse_dataset(text: &str, origin: &str) -> Result<OfflineDataset, FormatError> {
    let parse_err = |line: u64, message: String| FormatError::Parse {
        origin: origin.to_string(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|source| FormatError::Csv {
        origin: origin.to_string(),
        source,
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        let line = reader.position().line();
        return Err(parse_err(line, format!("expected header `{}`", HEADER.join(","))));
    }
    let mut slots: Vec<Vec<Transition>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| FormatError::Csv {
            origin: origin.to_string(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or_default();
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| parse_err(line, format!("invalid `{}` value `{}`: {e}", HEADER[i], field(i))))
        };
        let h = int(0)?;
        if h == 0 {
            return Err(parse_err(line, "step index `h` is one-based".to_string()));
        }
        let reward = field(3)
            .parse::<f64>()
            .map_err(|e| parse_err(line, format!("invalid `r` value `{}`: {e}", field(3))))?;
        let t = Transition {
            step: h - 1,
            state: int(1)?,
            action: int(2)?,
            reward,
            next_state: int(4)?,
        };
        if slots.len() < h {
            slots.resize_with(h, Vec::new);
        }
        slots[h - 1].push(t);
    }
    OfflineDataset::new(slots, parse_meta(text)).map_err(|e| FormatError::invalid(origin, e))
}

pub fn format_dataset(data: &OfflineDataset) -> String {
    let meta = data.meta();
    let mut out = String::new();
    if !meta.generator.is_empty() {
        writeln!(out, "# generator: {}", meta.generator).unwrap();
    }
    if let Some(seed) = meta.seed {
        writeln!(out, "# seed: {seed}").unwrap();
    }
    if !meta.mu_spec.is_empty() {
        writeln!(out, "# mu: {}", meta.mu_spec).unwrap();
    }
    if let Some(c) = meta.concentrability {
        writeln!(out, "# concentrability: {c}").unwrap();
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(HEADER).expect("in-memory write");
    for t in data.iter() {
        writer
            .write_record([
                (t.step + 1).to_string(),
                t.state.to_string(),
                t.action.to_string(),
                t.reward.to_string(),
                t.next_state.to_string(),
            ])
            .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields"));
    out
}

pub fn read_dataset(path: &Path) -> Result<OfflineDataset, FormatError> {
    parse_dataset(&read_text(path)?, &path.display().to_string())
}

pub fn write_dataset(path: &Path, data: &OfflineDataset) -> Result<(), FormatError> {
    write_text(path, &format_dataset(data))
}
