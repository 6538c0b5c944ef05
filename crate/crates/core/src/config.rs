//! Flat `key = value` configuration files.

use crate::error::{Error, Result};

/// Splits `key = value` lines in file order. Blank lines and `#` comments
/// are skipped; keys are lowercased and `-` is read as `_`.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parameter("config", format!("line {}: expected key = value", n + 1))
        })?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(Error::parameter(
                "config",
                format!("line {}: empty key", n + 1),
            ));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}
