//! Plain `key=value` text: metadata sidecars, config files and file headers.
//!
//! One pair per line, split at the first `=`, both sides trimmed. Blank lines
//! and lines starting with `#` are ignored. Order is preserved and repeated
//! keys are kept.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Pairs = Vec<(String, String)>;

pub fn parse(text: &str) -> Result<Pairs> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: k as u64 + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                row: k as u64 + 1,
                message: "empty key".into(),
            });
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn format(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// The same pairs as `# key=value` comment lines, for CSV headers.
pub fn format_comment(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Pairs> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse(&text)
}

pub fn write_file(path: impl AsRef<Path>, pairs: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format(pairs)).map_err(Error::io(path))
}

/// Last value recorded for `key`.
pub fn get<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Appends `key=value`.
pub fn push(pairs: &mut Pairs, key: &str, value: impl ToString) {
    pairs.push((key.to_string(), value.to_string()));
}
