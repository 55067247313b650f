//! Writers for the report files. Everything is written in a fixed order so
//! that equal inputs give byte-identical files.

use std::fs;
use std::path::Path;

use plab_core::decay::fmt17;
use serde::Serialize;

use crate::CliError;

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

/// CSV with a `# seed=S` comment line and a header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(seed: u64, header: &[&str]) -> Self {
        Self {
            text: format!("# seed={seed}\n{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<(), CliError> {
        fs::write(dir.join(name), &self.text)?;
        Ok(())
    }
}

pub fn num(v: f64) -> String {
    fmt17(v)
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// Whitespace-separated table for gnuplot; blank lines separate blocks.
pub fn write_plot_table(dir: &Path, name: &str, header: &[&str], blocks: &[Vec<Vec<f64>>]) -> Result<(), CliError> {
    let mut text = format!("# {}\n", header.join(" "));
    for (i, block) in blocks.iter().enumerate() {
        if i > 0 {
            text.push_str("\n\n");
        }
        for row in block {
            let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
            text.push_str(&cells.join(" "));
            text.push('\n');
        }
    }
    fs::write(dir.join(name), text)?;
    Ok(())
}
