use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub const SCHEMA: u32 = 1;

/// `# key=value` lines heading every output file.
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    pub fn new(command: &str, deterministic: bool) -> Self {
        let mut lines = vec![format!("schema={SCHEMA}"), format!("command={command}")];
        if deterministic {
            lines.push("deterministic=true".into());
        } else {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            lines.push(format!("generated=unix:{secs}"));
        }
        Self { lines }
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.lines.push(format!("{key}={value}"));
    }

    fn render(&self) -> String {
        self.lines.iter().map(|l| format!("# {l}\n")).collect()
    }
}

pub fn write(path: &Path, header: &Header, body: &str) -> Result<(), CliError> {
    let text = header.render() + body;
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Rounds to six decimals and drops the sign of zero, for terse printing.
pub fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Removes the 2 pi jumps of a principal-value angle series.
pub fn unwrap_angles(thetas: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(thetas.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &t in thetas {
        if let Some(p) = prev {
            let jump = t - p;
            if jump > PI {
                offset -= TAU;
            } else if jump < -PI {
                offset += TAU;
            }
        }
        prev = Some(t);
        out.push(t + offset);
    }
    out
}
