//! Deterministic table rendering: every run of the same command on the
//! same inputs must produce byte-identical output.

use sha2::{Digest, Sha256};
use shuntcav::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One table cell; numbers are formatted to 9 significant digits.
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

/// Formats with 9 significant digits as the shortest string that
/// round-trips the rounded value, so output never depends on excess
/// binary precision.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let a = x.abs();
    if (1e-4..1e9).contains(&a) {
        let rounded: f64 = format!("{x:.8e}").parse().unwrap();
        format!("{rounded}")
    } else {
        let s = format!("{x:.8e}");
        let (m, e) = s.split_once('e').unwrap();
        let m = m.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt9(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt9(*v),
            Cell::Text(s) => format!("\"{s}\""),
            Cell::Empty => "null".to_string(),
        }
    }
}

pub struct Table {
    /// Subcommand path for the provenance header, e.g. "modes".
    pub command: &'static str,
    /// Hash of the fully resolved inputs, 8 hex chars.
    pub config_hash: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// First 8 hex characters of the SHA-256 of the resolved-parameter string.
pub fn config_hash(resolved: &str) -> String {
    let digest = Sha256::digest(resolved.as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

impl Table {
    pub fn provenance(&self) -> String {
        format!("# shuntcav {VERSION} | {} | config={}", self.command, self.config_hash)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.provenance());
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.columns.len());
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"tool\": \"shuntcav\",\n  \"version\": \"{VERSION}\",\n"));
        out.push_str(&format!("  \"command\": \"{}\",\n", self.command));
        out.push_str(&format!("  \"config\": \"{}\",\n", self.config_hash));
        let cols: Vec<String> = self.columns.iter().map(|c| format!("\"{c}\"")).collect();
        out.push_str(&format!("  \"columns\": [{}],\n", cols.join(", ")));
        out.push_str("  \"rows\": [\n");
        for (i, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(Cell::json).collect();
            let sep = if i + 1 < self.rows.len() { "," } else { "" };
            out.push_str(&format!("    [{}]{sep}\n", cells.join(", ")));
        }
        out.push_str("  ]\n}\n");
        out
    }
}

/// Writes rendered output to `out` or stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .map_err(|e| Error::invalid(format!("cannot write to stdout: {e}")))
        }
    }
}
