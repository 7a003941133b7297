use toml::{Table, Value};

use crate::{Error, Result};

/// Parses a right-hand side as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `path=value` to a parsed config. Path segments are table keys or
/// array indices (`cells.0.budget`); missing tables are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path `{path}`")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("non-empty path");
    let mut node = root;
    for key in parents {
        node = step(node, key, path)?;
    }
    match node {
        Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        Value::Array(a) => {
            let i = index(last, a.len(), path)?;
            a[i] = value;
        }
        _ => {
            return Err(Error::Config(format!(
                "`{path}` does not address a table or array"
            )))
        }
    }
    Ok(())
}

fn index(key: &str, len: usize, path: &str) -> Result<usize> {
    key.parse::<usize>()
        .ok()
        .filter(|&i| i < len)
        .ok_or_else(|| Error::Config(format!("`{path}`: index `{key}` out of range")))
}

fn step<'a>(node: &'a mut Value, key: &str, path: &str) -> Result<&'a mut Value> {
    match node {
        Value::Table(t) => Ok(t
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()))),
        Value::Array(a) => {
            let i = index(key, a.len(), path)?;
            Ok(&mut a[i])
        }
        _ => Err(Error::Config(format!(
            "`{path}`: `{key}` is not a table or array"
        ))),
    }
}
