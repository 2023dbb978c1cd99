//! TOML scenario files and dotted-path overrides.

use std::path::Path;

use crate::error::{Error, Result};
use crate::simloop::Scenario;

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    Ok(toml::from_str(text)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn to_toml(sc: &Scenario) -> Result<String> {
    toml::to_string(sc).map_err(|e| Error::config(format!("cannot serialize scenario: {e}")))
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back to
/// a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), value);
                    return Ok(());
                }
                t.entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| {
                    Error::config(format!("`{part}` in `{path}` is not an array index"))
                })?;
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| {
                    Error::config(format!("index {idx} out of range ({len}) in `{path}`"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::config(format!(
                    "`{path}` does not name a table or array"
                )))
            }
        };
    }
    Err(Error::config("empty override path"))
}

/// Applies `key.path=value` overrides; arrays are indexed by number
/// (`channels.0.gains.kp=2`).
pub fn apply_overrides(sc: &Scenario, overrides: &[String]) -> Result<Scenario> {
    if overrides.is_empty() {
        return Ok(sc.clone());
    }
    let mut value = toml::Value::try_from(sc)
        .map_err(|e| Error::config(format!("cannot serialize scenario: {e}")))?;
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{ov}` is not key=value")))?;
        set_path(&mut value, key.trim(), parse_value(raw.trim()))?;
    }
    value
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(format!("invalid override: {}", e.message())))
}
