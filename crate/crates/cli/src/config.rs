//! `--config` files: a flat JSON object whose keys are flag names. Its
//! entries are spliced into the argument list ahead of the user's own flags,
//! and since every option overrides itself, the command line wins.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{CliError, Result};

/// Finds `--config PATH` or `--config=PATH` among the arguments.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Flag arguments for every entry of the config object, in key order.
pub fn flags_from_config(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::file(path, e))?;
    let Value::Object(map) = value else {
        return Err(CliError::file(path, "config must be a JSON object"));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = key.replace('_', "-");
        if flag == "config" {
            return Err(CliError::file(path, "config files cannot include other configs"));
        }
        let text = match v {
            Value::Null => continue,
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => n.to_string(),
            Value::String(s) => s,
            Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            Value::Object(_) => {
                return Err(CliError::file(path, format!("config key `{key}` must be a scalar or list")))
            }
        };
        out.push(OsString::from(format!("--{flag}")));
        out.push(OsString::from(text));
    }
    Ok(out)
}

/// The argument list with config-file flags inserted right after the
/// subcommand name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    if argv.len() < 2 {
        return Ok(argv);
    }
    let extra = flags_from_config(&path)?;
    let mut out = Vec::with_capacity(argv.len() + extra.len());
    out.extend(argv[..2].iter().cloned());
    out.extend(extra);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}
