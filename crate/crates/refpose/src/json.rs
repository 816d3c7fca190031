//! Deterministic JSON output.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// A number rounded to 9 significant digits; non-finite values become
/// `null`.
pub fn num9(x: f64) -> Value {
    serde_json::Number::from_f64(round9(x)).map_or(Value::Null, Value::Number)
}

/// A number at full precision; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Pretty-printed with keys sorted and a trailing newline.
pub fn to_string(value: &Value) -> String {
    // serde_json's default map is ordered by key
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn write(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, to_string(value)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

pub fn read_as<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}
