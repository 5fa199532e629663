//! Merges a flat `key = value` config file into the argument vector.
//!
//! Each key names a long flag of the active subcommand. Flags given on the
//! command line win; config values are appended only for flags the user
//! did not pass.

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use clap::Command;

pub fn parse_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", n + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Value of `--config` in `argv`, if any.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(tok) = it.next() {
        let s = tok.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn given(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    argv.iter().any(|t| {
        let s = t.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Returns `argv` extended with the config entries it leaves unset.
pub fn merge(cmd: &Command, argv: Vec<OsString>, text: &str) -> Result<Vec<OsString>> {
    let entries = parse_file(text).context("parsing config")?;
    let sub = argv.iter().skip(1).find_map(|t| cmd.find_subcommand(t.to_string_lossy().as_ref()).cloned());
    let Some(sub) = sub else {
        return Ok(argv);
    };
    let mut merged = argv.clone();
    for (key, value) in entries {
        if key == "config" {
            bail!("config files cannot include other configs");
        }
        let Some(arg) = sub.get_arguments().chain(cmd.get_arguments()).find(|a| a.get_long() == Some(key.as_str()))
        else {
            bail!("config key `{key}` is not a flag of `{}`", sub.get_name());
        };
        if given(&argv, &key) {
            continue;
        }
        if arg.get_action().takes_values() {
            merged.push(format!("--{key}={value}").into());
        } else {
            match value.as_str() {
                "true" => merged.push(format!("--{key}").into()),
                "false" => {}
                _ => bail!("config key `{key}` expects true or false"),
            }
        }
    }
    Ok(merged)
}
