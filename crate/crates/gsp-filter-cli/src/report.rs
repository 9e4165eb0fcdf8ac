//! Check tables and output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn failed(name: &str, detail: impl Into<String>) -> Self {
        Check { name: name.into(), value: f64::NAN, tolerance: f64::NAN, pass: false, detail: detail.into() }
    }
}

/// Output directory with the file writers used by the commands.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, String> {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>, String> {
        let path = self.dir.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    pub fn json(&self, name: &str, value: &Value) -> Result<(), String> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| e.to_string())
    }

    pub fn checks_csv(&self, name: &str, checks: &[Check]) -> Result<(), String> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        w.write_record(["check", "value", "tolerance", "pass"]).map_err(|e| e.to_string())?;
        for c in checks {
            w.serialize((&c.name, c.value, c.tolerance, c.pass)).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())
    }
}

pub fn print_table(checks: &[Check]) {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    println!("{:<width$}  {:>11}  {:>11}  result", "check", "value", "tolerance");
    for c in checks {
        println!(
            "{:<width$}  {:>11.3e}  {:>11.3e}  {}{}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" },
            if c.detail.is_empty() { String::new() } else { format!("  ({})", c.detail) }
        );
    }
}
