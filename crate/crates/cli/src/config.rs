//! Key-value config files.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 13
//! translate.endpoint = http://localhost:8080
//! ```
//!
//! A bare key applies to any subcommand that has a flag of that name; a
//! `subcommand.key` applies to that subcommand only. Values are injected into
//! argv as flags only when the flag is absent from the command line, so flags
//! win over the file, and the file wins over `AMBIMT_*` environment variables.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub section: Option<String>,
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", origin.display(), i + 1);
        };
        let key = key.trim();
        let (section, key) = match key.split_once('.') {
            Some((s, k)) => (Some(s.trim().to_string()), k.trim()),
            None => (None, key),
        };
        if key.is_empty() {
            bail!("{}:{}: empty key", origin.display(), i + 1);
        }
        entries.push(Entry {
            line: i + 1,
            section,
            key: key.replace('_', "-"),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

fn has_flag(args: &[String], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    args.iter()
        .any(|a| *a == flag || a.starts_with(&with_value))
}

/// Locates the config path (`--config` flag anywhere, else `AMBIMT_CONFIG`)
/// and the position of the subcommand in `argv`.
fn scan(argv: &[String]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut sub_at = None;
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if a == "--" {
            break;
        } else if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
            i += 1;
        } else if a == "--format" && sub_at.is_none() {
            i += 2;
        } else {
            if sub_at.is_none() && !a.starts_with('-') {
                sub_at = Some(i);
            }
            i += 1;
        }
    }
    (config.or_else(env_config), sub_at)
}

fn env_config() -> Option<PathBuf> {
    std::env::var_os("AMBIMT_CONFIG")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn injected(cmd: &Command, entry: &Entry, present: &[String]) -> Option<Vec<String>> {
    let arg = cmd
        .get_arguments()
        .find(|a| a.get_long() == Some(entry.key.as_str()))?;
    if has_flag(present, &entry.key) {
        return Some(Vec::new());
    }
    match arg.get_action() {
        ArgAction::SetTrue => match entry.value.as_str() {
            "true" | "yes" | "1" => Some(vec![format!("--{}", entry.key)]),
            _ => Some(Vec::new()),
        },
        _ => Some(vec![format!("--{}={}", entry.key, entry.value)]),
    }
}

/// Returns argv with config-file values added as flags.
pub fn apply_config(argv: Vec<OsString>, root: &Command) -> Result<Vec<String>> {
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| {
            a.into_string()
                .map_err(|a| anyhow::anyhow!("argument {a:?} is not valid UTF-8"))
        })
        .collect::<Result<_>>()?;
    let (path, sub_at) = scan(&argv);
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let entries = parse_config(&text, &path)?;

    let (head, tail) = match sub_at {
        Some(i) => (argv[..=i].to_vec(), argv[i + 1..].to_vec()),
        None => (argv.clone(), Vec::new()),
    };
    let sub = sub_at.and_then(|i| root.find_subcommand(&argv[i]));
    let mut global_extra = Vec::new();
    let mut sub_extra = Vec::new();
    for entry in &entries {
        if let Some(section) = &entry.section {
            if sub.is_none_or(|s| s.get_name() != section) {
                let Some(other) = root.find_subcommand(section) else {
                    bail!(
                        "{}:{}: unknown section {section:?}",
                        path.display(),
                        entry.line
                    );
                };
                if !other
                    .get_arguments()
                    .any(|a| a.get_long() == Some(entry.key.as_str()))
                {
                    bail!(
                        "{}:{}: unknown key {:?}",
                        path.display(),
                        entry.line,
                        entry.key
                    );
                }
                continue;
            }
        }
        if let Some(flags) = sub.and_then(|s| injected(s, entry, &tail)) {
            sub_extra.extend(flags);
        } else if let Some(flags) = injected(root, entry, &head) {
            global_extra.extend(flags);
        } else if entry.section.is_some() {
            bail!(
                "{}:{}: unknown key {:?}",
                path.display(),
                entry.line,
                entry.key
            );
        }
        // bare keys for other subcommands are ignored
    }

    let mut out = vec![argv[0].clone()];
    out.extend(global_extra);
    out.extend(head.into_iter().skip(1));
    out.extend(sub_extra);
    out.extend(tail);
    Ok(out)
}
