//! Flat `key = value` config files.
//!
//! Each key is a long flag name without the leading dashes. The file's
//! entries are spliced into the argument list right after the subcommand,
//! ahead of the user's own flags, and every subcommand lets a later flag
//! override an earlier one, so flags on the command line win.

use anyhow::{bail, Context, Result};
use std::path::Path;

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{line}`", i + 1);
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            bail!("config line {}: invalid key `{}`", i + 1, key);
        }
        out.push((key, value.to_string()));
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

/// Returns `args` with the entries of any `--config` file inserted after
/// the subcommand name.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("--config: cannot read {path}"))?;
    let entries = parse(&text).with_context(|| format!("--config: {path}"))?;
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    for (k, v) in entries {
        out.push(format!("--{k}"));
        out.push(v);
    }
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
