use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "vibropol";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_sha256: format!("{:x}", Sha256::digest(config_text.as_bytes())),
        }
    }
}

/// CSV with '#' metadata lines, a header row and scientific-notation numbers.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(meta: &Meta, extra: &[(&str, String)], columns: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# tool: {} {}", meta.tool, meta.version).unwrap();
        writeln!(text, "# command: {}", meta.command).unwrap();
        writeln!(text, "# config_sha256: {}", meta.config_sha256).unwrap();
        for (key, value) in extra {
            writeln!(text, "# {key}: {value}").unwrap();
        }
        writeln!(text, "{}", columns.join(",")).unwrap();
        Self { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        writeln!(self.text, "{}", line.join(",")).unwrap();
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
