//! Configuration files with dotted `key=value` overrides. Values are TOML
//! literals; anything that does not parse as one is taken as a string.
//! Unknown keys fail deserialization.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{contract, io_err, CliError, Result};

pub const ECHO_FILE: &str = "config.toml";

pub fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just written"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `dotted.key` inside `table`, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return contract(format!("malformed override key {key:?}"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return contract(format!("override {key:?}: {p} is not a table")),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Contract(format!("override {s:?} is not key=value")))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

/// Reads `file` (if any), applies `overrides` in order and deserializes.
pub fn resolve<C: DeserializeOwned>(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<C> {
    let mut table = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Contract(format!("{}: {}", path.display(), e.message())))?
        }
        None => Table::new(),
    };
    for (k, v) in overrides {
        set_path(&mut table, k, v.clone())?;
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Contract(format!("config: {}", e.message())))
}

pub fn to_toml<C: Serialize>(cfg: &C) -> String {
    toml::to_string(cfg).expect("configs serialize to TOML")
}

/// Prints the effective configuration and writes it to `dir/config.toml`.
pub fn echo<C: Serialize>(cfg: &C, dir: Option<&Path>) -> Result<()> {
    let text = to_toml(cfg);
    println!("# effective configuration\n{}", text.trim_end());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(ECHO_FILE);
        fs::write(&path, &text).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use serde::Deserialize;

    use super::*;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Inner {
        lo: usize,
        name: String,
    }

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Outer {
        rate: f64,
        inner: Inner,
    }

    #[test]
    fn overrides_build_nested_tables() {
        let o = vec![parse_override("inner.lo=7").unwrap(), parse_override("rate = 0.5").unwrap(), parse_override("inner.name=abc").unwrap()];
        let cfg: Outer = resolve(None, &o).unwrap();
        assert_eq!(cfg, Outer { rate: 0.5, inner: Inner { lo: 7, name: "abc".into() } });
    }

    #[test]
    fn later_overrides_win_and_file_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "rate = 1.0\n[inner]\nlo = 3\n").unwrap();
        let o = vec![parse_override("inner.lo=4").unwrap(), parse_override("inner.lo=5").unwrap()];
        let cfg: Outer = resolve(Some(&path), &o).unwrap();
        assert_eq!((cfg.rate, cfg.inner.lo), (1.0, 5));
    }

    #[test]
    fn unknown_and_malformed_keys_are_contract_errors() {
        let e = resolve::<Outer>(None, &[parse_override("inner.hi=1").unwrap()]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("hi"), "{e}");
        assert!(parse_override("novalue").is_err());
        assert!(resolve::<Outer>(None, &[("a..b".into(), Value::Integer(1))]).is_err());
        assert!(resolve::<Outer>(None, &[parse_override("rate.x=1").unwrap(), parse_override("rate.x.y=1").unwrap()]).is_err());
        let e = resolve::<Outer>(Some(Path::new("/nonexistent/c.toml")), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn values_fall_back_to_strings() {
        assert_eq!(parse_value("12"), Value::Integer(12));
        assert_eq!(parse_value("true"), Value::Boolean(true));
        assert_eq!(parse_value("\"x\""), Value::String("x".into()));
        assert_eq!(parse_value("data/m.json"), Value::String("data/m.json".into()));
        assert_eq!(parse_value("[1, 2]"), Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
    }
}
