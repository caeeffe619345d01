use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a> {
    pub schema_version: &'static str,
    pub command: &'a str,
    pub units: Units,
    pub model: Value,
    pub result: Value,
}

/// Multiplies the listed numeric fields of `value` (recursively through
/// arrays and nested objects) by `factor`.
pub fn scale_fields(value: &mut Value, fields: &[&str], factor: f64) {
    if factor == 1.0 {
        return;
    }
    match value {
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if fields.contains(&key.as_str()) {
                    scale_all(v, factor);
                } else {
                    scale_fields(v, fields, factor);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| scale_fields(v, fields, factor)),
        _ => {}
    }
}

fn scale_all(value: &mut Value, factor: f64) {
    match value {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                *value = serde_json::json!(x * factor);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| scale_all(v, factor)),
        _ => {}
    }
}

pub fn emit(envelope: &Envelope<'_>, out: Option<&Path>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(envelope).map_err(std::io::Error::other)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

pub fn write_csv<S: Serialize>(path: &Path, rows: impl IntoIterator<Item = S>) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
