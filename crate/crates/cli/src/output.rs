//! CSV emission with a `#`-prefixed metadata header.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::config::ScenarioConfig;

pub const SCHEMA: &str = "qosc-csv/1";

pub const BUILD_ID: &str = env!("QOSC_BUILD_ID");

/// Seventeen significant digits: enough to round-trip any f64.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A table held in memory until it is written, so output order never
/// depends on evaluation order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, command: &str, config: &ScenarioConfig, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# schema: {SCHEMA}")?;
        writeln!(out, "# command: {command}")?;
        writeln!(out, "# build: {BUILD_ID}")?;
        writeln!(out, "# units: frequencies in {u}, times in 1/{u}", u = config.units)?;
        for (k, v) in &config.entries {
            writeln!(out, "# config: {k} = {v}")?;
        }
        for line in &self.meta {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| float(x)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write(&self, command: &str, config: &ScenarioConfig, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(command, config, &mut w)?;
        w.flush()
    }
}
