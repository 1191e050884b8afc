//! `key=value` configuration files merged into the argument list.
//!
//! Keys are long flag names without the leading dashes. A flag given on the
//! command line wins over the same key in the file. `true` turns a switch on,
//! `false` leaves it off.

use std::path::Path;

use anyhow::Result;

use crate::output::{read_input, usage};

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!("{}:{}: expected key=value", origin.display(), i + 1)));
        };
        let key = k.trim().trim_start_matches("--");
        if key.is_empty() || key == "config" {
            return Err(usage(format!("{}:{}: invalid key `{}`", origin.display(), i + 1, k.trim())));
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn has_flag(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let prefix = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&prefix))
}

/// Append entries of the `--config` file (if any) that the arguments do not already set.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8 text", path.display())))?;
    let mut merged = args.clone();
    for (key, value) in parse_config(&text, path)? {
        if has_flag(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => merged.push(format!("--{key}")),
            "false" => {}
            _ => {
                merged.push(format!("--{key}"));
                merged.push(value);
            }
        }
    }
    Ok(merged)
}
