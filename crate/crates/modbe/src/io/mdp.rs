//! MDP text format.
//!
//! ```text
//! # comments anywhere
//! S A H
//! rho(0) ... rho(S-1)
//! H blocks of S*A rows, row (x, a) in x-major order: P_h(0|x,a) ... P_h(S-1|x,a)
//! S rows: r(x, 0) ... r(x, A-1)
//! ```

use std::fmt::Write;
use std::path::Path;

use modbe_core::TabularMdp;

use super::{join, parse_row, read_text, write_text, FormatError, Lines};

pub fn parse_mdp(text: &str, origin: &str) -> Result<TabularMdp, FormatError> {
    let mut lines = Lines::new(text, origin);
    let header = lines.expect("`S A H` header")?;
    let dims: Vec<usize> = parse_row(&lines, header, 3, "`S A H` header")?;
    let (s, na, h) = (dims[0], dims[1], dims[2]);
    if s == 0 || na == 0 || h == 0 {
        return Err(lines.error(header.number, "S, A and H must be positive"));
    }
    let line = lines.expect("initial distribution")?;
    let initial = parse_row(&lines, line, s, "initial distribution")?;
    let mut transitions = Vec::with_capacity(h * s * na * s);
    for step in 0..h {
        for row in 0..s * na {
            let what = format!("transition row (h={}, x={}, a={})", step + 1, row / na, row % na);
            let line = lines.expect(&what)?;
            transitions.extend(parse_row::<f64>(&lines, line, s, &what)?);
        }
    }
    let mut rewards = Vec::with_capacity(s * na);
    for x in 0..s {
        let what = format!("reward row for state {x}");
        let line = lines.expect(&what)?;
        rewards.extend(parse_row::<f64>(&lines, line, na, &what)?);
    }
    if let Some(extra) = lines.next() {
        return Err(lines.error(extra.number, "trailing content after reward rows"));
    }
    TabularMdp::new(s, na, h, transitions, rewards, initial).map_err(|e| FormatError::invalid(origin, e))
}

pub fn format_mdp(mdp: &TabularMdp) -> String {
    let (s, na, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut out = String::new();
    writeln!(out, "# S A H").unwrap();
    writeln!(out, "{s} {na} {h}").unwrap();
    writeln!(out, "# initial distribution").unwrap();
    writeln!(out, "{}", join(mdp.initial())).unwrap();
    for step in 0..h {
        writeln!(out, "# transitions, step {}", step + 1).unwrap();
        for x in 0..s {
            for a in 0..na {
                writeln!(out, "{}", join(mdp.transition_row(step, x, a))).unwrap();
            }
        }
    }
    writeln!(out, "# rewards").unwrap();
    for row in mdp.rewards().chunks(na) {
        writeln!(out, "{}", join(row)).unwrap();
    }
    out
}

pub fn read_mdp(path: &Path) -> Result<TabularMdp, FormatError> {
    parse_mdp(&read_text(path)?, &path.display().to_string())
}

pub fn write_mdp(path: &Path, mdp: &TabularMdp) -> Result<(), FormatError> {
    write_text(path, &format_mdp(mdp))
}
