//! Nested class sequence format.
//!
//! ```text
//! states 4
//! actions 2
//! clip 4                  # or `clip none`
//! ridge scaled 1e-6       # optional, linear classes only
//! features 3              # optional, followed by S*A rows of 3 values (x-major)
//! class finite
//! member 0 0 0 0 0 0 0 0  # S*A values, x-major
//! member 1 0 1 0 1 0 1 0
//! class abstraction 0 0 1 1
//! class tabular
//! class linear 2          # first 2 feature coordinates
//! ```
//!
//! Classes are listed smallest first.

use std::fmt::Write;
use std::path::Path;
use std::sync::Arc;

use modbe_core::funcclass::ClassKind;
use modbe_core::{FeatureMap, FunctionClass, NestedSequence, QTable, Ridge, TableFeatures};

use super::{join, parse_row, parse_token, read_text, write_text, FormatError, Line, Lines};

enum Pending {
    Finite { line: usize, members: Vec<QTable> },
    Built(FunctionClass),
}

pub fn parse_classes(text: &str, origin: &str) -> Result<NestedSequence, FormatError> {
    let mut lines = Lines::new(text, origin);
    let mut states = None;
    let mut actions = None;
    let mut bound: Option<Option<f64>> = None;
    let mut ridge = Ridge::default();
    let mut features: Option<Arc<dyn FeatureMap>> = None;
    let mut classes: Vec<Pending> = Vec::new();

    let need = |lines: &Lines, line: Line, value: Option<usize>, key: &str| {
        value.ok_or_else(|| lines.error(line.number, format!("`{key}` must be declared before this line")))
    };

    while let Some(line) = lines.next() {
        let mut tokens = line.text.split_whitespace();
        let key = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();
        let one = |lines: &Lines| -> Result<&str, FormatError> {
            match rest.as_slice() {
                [v] => Ok(*v),
                _ => Err(lines.error(line.number, format!("`{key}` takes exactly one value"))),
            }
        };
        match key {
            "states" => states = Some(parse_token(&lines, line, one(&lines)?, "state count")?),
            "actions" => actions = Some(parse_token(&lines, line, one(&lines)?, "action count")?),
            "clip" => {
                let v = one(&lines)?;
                bound = Some(if v == "none" {
                    None
                } else {
                    Some(parse_token(&lines, line, v, "clip bound")?)
                });
            }
            "ridge" => {
                let (kind, value) = match rest.as_slice() {
                    [k, v] => (*k, parse_token::<f64>(&lines, line, v, "ridge value")?),
                    _ => return Err(lines.error(line.number, "expected `ridge scaled|fixed <value>`")),
                };
                ridge = match kind {
                    "scaled" => Ridge::Scaled(value),
                    "fixed" => Ridge::Fixed(value),
                    other => return Err(lines.error(line.number, format!("unknown ridge kind `{other}`"))),
                };
            }
            "features" => {
                let s = need(&lines, line, states, "states")?;
                let na = need(&lines, line, actions, "actions")?;
                let dim: usize = parse_token(&lines, line, one(&lines)?, "feature dimension")?;
                let mut values = Vec::with_capacity(s * na * dim);
                for i in 0..s * na {
                    let what = format!("feature row (x={}, a={})", i / na, i % na);
                    let row = lines.expect(&what)?;
                    values.extend(parse_row::<f64>(&lines, row, dim, &what)?);
                }
                let table = TableFeatures::new(s, na, dim, values).map_err(|e| FormatError::invalid(origin, e))?;
                features = Some(Arc::new(table));
            }
            "member" => {
                let s = need(&lines, line, states, "states")?;
                let na = need(&lines, line, actions, "actions")?;
                let Some(Pending::Finite { members, .. }) = classes.last_mut() else {
                    return Err(lines.error(line.number, "`member` must follow `class finite`"));
                };
                let row = Line {
                    number: line.number,
                    text: line.text.trim_start_matches("member"),
                };
                let values = parse_row::<f64>(&lines, row, s * na, "member values")?;
                members.push(QTable::from_values(s, na, values).map_err(|e| FormatError::invalid(origin, e))?);
            }
            "class" => {
                let s = need(&lines, line, states, "states")?;
                let na = need(&lines, line, actions, "actions")?;
                let b = bound.ok_or_else(|| lines.error(line.number, "`clip` must be declared before classes"))?;
                let built = |r: modbe_core::Result<FunctionClass>| {
                    r.map_err(|e| lines.error(line.number, e.to_string()))
                };
                let kind = rest.first().copied().unwrap_or_default();
                let args = &rest[rest.len().min(1)..];
                let pending = match kind {
                    "finite" => Pending::Finite {
                        line: line.number,
                        members: Vec::new(),
                    },
                    "tabular" => Pending::Built(built(FunctionClass::tabular(s, na, b))?),
                    "abstraction" => {
                        if args.len() != s {
                            return Err(lines.error(line.number, format!("expected {s} block labels, found {}", args.len())));
                        }
                        let blocks = args
                            .iter()
                            .map(|t| parse_token(&lines, line, t, "block label"))
                            .collect::<Result<Vec<usize>, _>>()?;
                        Pending::Built(built(FunctionClass::abstraction(blocks, na, b))?)
                    }
                    "linear" => {
                        let [d] = args else {
                            return Err(lines.error(line.number, "expected `class linear <dim>`"));
                        };
                        let dim = parse_token(&lines, line, d, "dimension")?;
                        let map = features
                            .clone()
                            .ok_or_else(|| lines.error(line.number, "`features` must be declared before linear classes"))?;
                        Pending::Built(built(FunctionClass::linear(map, dim, ridge, b))?)
                    }
                    other => return Err(lines.error(line.number, format!("unknown class kind `{other}`"))),
                };
                classes.push(pending);
            }
            other => return Err(lines.error(line.number, format!("unknown key `{other}`"))),
        }
    }

    let mut built = Vec::with_capacity(classes.len());
    for c in classes {
        built.push(match c {
            Pending::Built(c) => c,
            Pending::Finite { line, members } => {
                let b = bound.flatten();
                FunctionClass::finite(members, b).map_err(|e| lines.error(line, e.to_string()))?
            }
        });
    }
    if built.is_empty() {
        return Err(lines.error(1, "no classes declared"));
    }
    NestedSequence::new(built).map_err(|e| FormatError::invalid(origin, e))
}

pub fn format_classes(classes: &NestedSequence) -> String {
    let first = classes.get(0);
    let (s, na) = (first.num_states(), first.num_actions());
    let mut out = String::new();
    writeln!(out, "states {s}").unwrap();
    writeln!(out, "actions {na}").unwrap();
    match first.bound() {
        Some(b) => writeln!(out, "clip {b}").unwrap(),
        None => writeln!(out, "clip none").unwrap(),
    }
    let linear = classes.classes().iter().rev().find_map(|c| match c.kind() {
        ClassKind::Linear { features, ridge, .. } => Some((features.clone(), *ridge)),
        _ => None,
    });
    if let Some((features, ridge)) = linear {
        match ridge {
            Ridge::Scaled(v) => writeln!(out, "ridge scaled {v}").unwrap(),
            Ridge::Fixed(v) => writeln!(out, "ridge fixed {v}").unwrap(),
        }
        let dim = features.dim();
        writeln!(out, "features {dim}").unwrap();
        let mut row = vec![0.0; dim];
        for x in 0..s {
            for a in 0..na {
                features.write_features(x, a, &mut row);
                writeln!(out, "{}", join(&row)).unwrap();
            }
        }
    }
    for c in classes.classes() {
        match c.kind() {
            ClassKind::Finite { members } => {
                writeln!(out, "class finite").unwrap();
                for m in members {
                    writeln!(out, "member {}", join(m.values())).unwrap();
                }
            }
            ClassKind::Abstraction { blocks, .. } => writeln!(out, "class abstraction {}", join(blocks)).unwrap(),
            ClassKind::Linear { dim, .. } => writeln!(out, "class linear {dim}").unwrap(),
        }
    }
    out
}

pub fn read_classes(path: &Path) -> Result<NestedSequence, FormatError> {
    parse_classes(&read_text(path)?, &path.display().to_string())
}

pub fn write_classes(path: &Path, classes: &NestedSequence) -> Result<(), FormatError> {
    write_text(path, &format_classes(classes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
states 2
actions 1
clip 2
class finite
member 0 0
member 0.5 0.5
class abstraction 0 0
class tabular
";

    #[test]
    fn parses_sequence() {
        let classes = parse_classes(SAMPLE, "inline").unwrap();
        assert_eq!(classes.len(), 3);
        assert_eq!(classes.get(0).variant_name(), "finite");
        assert_eq!(classes.get(2).complexity(), 2.0 * (16.0f64).ln());
    }

    #[test]
    fn finite_round_trip() {
        let classes = parse_classes(SAMPLE, "inline").unwrap();
        let text = format_classes(&classes);
        let again = parse_classes(&text, "again").unwrap();
        assert_eq!(format_classes(&again), text);
    }

    #[test]
    fn linear_round_trip() {
        let text = "states 2\nactions 1\nclip none\nridge fixed 0.5\nfeatures 2\n1 0\n0.5 2\nclass linear 1\nclass linear 2\n";
        let classes = parse_classes(text, "lin").unwrap();
        assert_eq!(classes.get(1).complexity(), 2.0);
        assert_eq!(format_classes(&classes), text);
    }

    #[test]
    fn rejects_bad_input_with_line() {
        let missing_zero = SAMPLE.replace("member 0 0\n", "");
        let err = parse_classes(&missing_zero, "z").unwrap_err().to_string();
        assert!(err.starts_with("z:4:"), "{err}");
        let unnested = "states 2\nactions 1\nclip 2\nclass tabular\nclass abstraction 0 0\n";
        assert!(matches!(parse_classes(unnested, "u"), Err(FormatError::Invalid { .. })));
        let unknown = "states 2\nactions 1\nclip 2\nclass neural\n";
        assert!(parse_classes(unknown, "k").unwrap_err().to_string().starts_with("k:4:"));
        assert!(parse_classes("clip 2\nclass tabular\n", "o").unwrap_err().to_string().starts_with("o:2:"));
    }
}
