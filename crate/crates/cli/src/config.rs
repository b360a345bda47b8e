//! Flat `key=value` run files and the argv they expand to.
//!
//! Every output file starts with its resolved configuration as `# key=value`
//! header lines, so an output file is itself a valid `--config` input. Keys
//! are long flag names without the dashes. Lines without `=` (CSV rows) are
//! ignored.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::CliError;

pub const SUBCOMMANDS: [&str; 6] = [
    "steady-state",
    "gains",
    "trajectory",
    "locus",
    "purity-scan",
    "spectral",
];

/// Keys that describe a file rather than a run.
fn is_metadata(key: &str) -> bool {
    matches!(key, "schema" | "command" | "generated" | "config") || key.starts_with("note.")
}

/// Switches that take no value on the command line.
const SWITCHES: [&str; 2] = ["deterministic", "degrees"];

#[derive(Debug, Default, PartialEq)]
pub struct RunFile {
    pub command: Option<String>,
    pub pairs: Vec<(String, String)>,
}

pub fn parse_run_file(text: &str) -> Result<RunFile, CliError> {
    let mut out = RunFile::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_start_matches('#').trim();
        if line.is_empty() || !line.contains('=') {
            continue;
        }
        let (key, value) = line.split_once('=').expect("checked above");
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(CliError::Usage(format!(
                "config line {}: malformed key in '{raw}'",
                lineno + 1
            )));
        }
        if key == "command" {
            out.command = Some(value.to_string());
        }
        if is_metadata(key) {
            continue;
        }
        out.pairs.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

pub fn load_run_file(path: &Path) -> Result<RunFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_run_file(&text)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Splices the pairs of a `--config` file in front of the user's own flags
/// so that flags given on the command line win.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let file = load_run_file(Path::new(&path))?;
    let mut injected = Vec::new();
    for (k, v) in &file.pairs {
        if SWITCHES.contains(&k.as_str()) {
            match v.as_str() {
                "true" => injected.push(OsString::from(format!("--{k}"))),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "config key {k}: expected true or false, got {other}"
                    )))
                }
            }
        } else {
            injected.push(OsString::from(format!("--{k}={v}")));
        }
    }
    let sub = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let mut out = Vec::with_capacity(args.len() + injected.len() + 1);
    match (sub, file.command) {
        (Some(i), _) => {
            out.extend_from_slice(&args[..=i]);
            out.extend(injected);
            out.extend_from_slice(&args[i + 1..]);
        }
        (None, Some(cmd)) => {
            out.push(args[0].clone());
            out.push(cmd.into());
            out.extend(injected);
            out.extend_from_slice(&args[1..]);
        }
        (None, None) => return Ok(args),
    }
    Ok(out)
}
