//! Minimal sectioned-text reader shared by the checkpoint and device-model
//! formats: `[section]` headers, `#` comments, blank lines ignored.

use crate::error::{Error, Result};

pub struct Section {
    pub name: String,
    pub lines: Vec<String>,
}

pub fn split_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse(format!("line {}: malformed section header", lineno + 1)))?;
            sections.push(Section { name: name.trim().to_string(), lines: Vec::new() });
        } else {
            match sections.last_mut() {
                Some(s) => s.lines.push(line.to_string()),
                None => {
                    return Err(Error::Parse(format!(
                        "line {}: content before any [section] header",
                        lineno + 1
                    )));
                }
            }
        }
    }
    Ok(sections)
}

/// Parse a `key = value` line.
pub fn key_value(line: &str) -> Result<(&str, &str)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected `key = value`, got `{line}`")))?;
    Ok((k.trim(), v.trim()))
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

pub fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer `{s}`")))
}

/// Space-separated decimal floats; `{}` formatting round-trips f64 exactly.
pub fn floats_line(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

pub fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace().map(parse_f64).collect()
}
