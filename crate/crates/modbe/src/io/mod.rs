//! Plain-text file formats: MDPs, class sequences, datasets and traces.
//!
//! All readers skip blank lines and `#` comments and report the one-based line
//! number of the first offending line.

pub mod classes;
pub mod dataset;
pub mod mdp;
pub mod trace;

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{origin}:{line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        #[source]
        source: modbe_core::Error,
    },
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {source}")]
    Csv {
        origin: String,
        #[source]
        source: csv::Error,
    },
}

impl FormatError {
    pub(crate) fn invalid(origin: &str, source: modbe_core::Error) -> Self {
        FormatError::Invalid {
            origin: origin.to_string(),
            source,
        }
    }

    pub(crate) fn io(origin: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            origin: origin.display().to_string(),
            source,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

/// A non-empty, comment-stripped line with its one-based number.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub text: &'a str,
}

pub(crate) struct Lines<'a> {
    origin: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str, origin: &'a str) -> Self {
        Lines {
            origin,
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> FormatError {
        FormatError::Parse {
            origin: self.origin.to_string(),
            line,
            message: message.into(),
        }
    }

    /// The next meaningful line, or an "unexpected end" error naming `what`.
    pub fn expect(&mut self, what: &str) -> Result<Line<'a>, FormatError> {
        let last = self.last;
        self.next().ok_or_else(|| self.error(last + 1, format!("unexpected end of input, expected {what}")))
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = Line<'a>;

    fn next(&mut self) -> Option<Line<'a>> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if !text.is_empty() {
                return Some(Line { number: i + 1, text });
            }
        }
        None
    }
}

pub(crate) fn parse_token<T: FromStr>(lines: &Lines, line: Line, token: &str, what: &str) -> Result<T, FormatError>
where
    T::Err: Display,
{
    token
        .parse()
        .map_err(|e| lines.error(line.number, format!("invalid {what} `{token}`: {e}")))
}

/// Parses exactly `count` whitespace-separated values from one line.
pub(crate) fn parse_row<T: FromStr>(lines: &Lines, line: Line, count: usize, what: &str) -> Result<Vec<T>, FormatError>
where
    T::Err: Display,
{
    let tokens: Vec<&str> = line.text.split_whitespace().collect();
    if tokens.len() != count {
        return Err(lines.error(
            line.number,
            format!("expected {count} values for {what}, found {}", tokens.len()),
        ));
    }
    tokens.iter().map(|t| parse_token(lines, line, t, what)).collect()
}

pub(crate) fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
