//! Small helpers shared by the TSV artifact readers and writers.
//!
//! Floats are written with `{}` (shortest representation that round-trips),
//! so every artifact re-loads bit-exactly.

use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    what: &'static str,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(reader: R, what: &'static str) -> Self {
        Lines {
            inner: reader.lines(),
            line: 0,
            what,
        }
    }

    /// Next non-blank line split on tabs, with its 1-based line number.
    pub(crate) fn next_record(&mut self) -> Result<Option<(usize, Vec<String>)>> {
        for line in self.inner.by_ref() {
            self.line += 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            return Ok(Some((self.line, line.split('\t').map(str::to_owned).collect())));
        }
        Ok(None)
    }

    pub(crate) fn expect_record(&mut self) -> Result<(usize, Vec<String>)> {
        let line = self.line + 1;
        self.next_record()?
            .ok_or_else(|| Error::format(self.what, line, "unexpected end of file"))
    }
}

pub(crate) fn parse<T: FromStr>(what: &str, (line, raw): (usize, String)) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::format(what, line, format!("cannot parse `{raw}`: {e}")))
}

/// Terms are stored unquoted, so they must not contain field separators.
pub(crate) fn check_field(field: &str) -> Result<()> {
    if field.contains(['\t', '\n', '\r']) {
        Err(Error::param(
            "term",
            format!("{field:?} contains a tab or newline and cannot be written to TSV"),
        ))
    } else {
        Ok(())
    }
}

/// Parses `# key=value key=value` header comments.
pub(crate) fn header_value<'a>(record: &'a [String], key: &str) -> Option<&'a str> {
    record
        .iter()
        .flat_map(|f| f.trim_start_matches('#').split_whitespace())
        .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
}
