//! Reading JSON inputs and writing outputs with path-qualified errors.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{config, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))
}

/// Deserializes `text`, naming the offending field path on failure.
pub fn parse_json<T: DeserializeOwned>(origin: &str, text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| located(origin, &e.path().to_string(), e.inner()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json(&path.display().to_string(), &read_text(path)?)
}

/// Like `parse_json` for an already parsed value nested at `prefix`.
pub fn from_value<T: DeserializeOwned>(origin: &str, prefix: &str, v: Value) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." {
            prefix.to_string()
        } else {
            format!("{prefix}.{inner}")
        };
        located(origin, &path, e.inner())
    })
}

fn located(origin: &str, path: &str, err: impl std::fmt::Display) -> crate::error::CliError {
    if path == "." || path.is_empty() {
        config(format!("{origin}: {err}"))
    } else {
        config(format!("{origin}: {path}: {err}"))
    }
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| config(format!("cannot write {}: {e}", path.display())))
}

/// Flattens nested arrays of `0`/`1`/booleans in row-major order.
pub fn support_bits(v: &Value, what: &str) -> CliResult<Vec<bool>> {
    fn walk(v: &Value, out: &mut Vec<bool>) -> Result<(), String> {
        match v {
            Value::Array(items) => items.iter().try_for_each(|x| walk(x, out)),
            Value::Bool(b) => {
                out.push(*b);
                Ok(())
            }
            Value::Number(n) if n.as_u64() == Some(0) => {
                out.push(false);
                Ok(())
            }
            Value::Number(n) if n.as_u64() == Some(1) => {
                out.push(true);
                Ok(())
            }
            other => Err(format!("expected 0, 1 or a boolean, found {other}")),
        }
    }
    let mut out = Vec::new();
    walk(v, &mut out).map_err(|e| config(format!("{what}: {e}")))?;
    Ok(out)
}
