use std::io::Write;

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Build identifier recorded in output headers.
pub const BUILD_ID: &str = concat!("ecmimo-cli ", env!("CARGO_PKG_VERSION"), " (", env!("ECMIMO_BUILD_ID"), ")");

/// A result table plus run-specific metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new(), meta: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Writes `#` metadata lines, then the CSV header and rows.
    pub fn write_csv<W: Write>(&self, cfg: &ExperimentConfig, mut out: W) -> Result<()> {
        let io = |e| crate::error::CliError::Io { path: "output".into(), source: e };
        writeln!(out, "# ecmimo {}", cfg.experiment.as_str()).map_err(io)?;
        writeln!(out, "# build: {BUILD_ID}").map_err(io)?;
        writeln!(out, "# seed: {}", cfg.run.seed).map_err(io)?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}").map_err(io)?;
        }
        for line in cfg.metadata_lines() {
            writeln!(out, "{line}").map_err(io)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    /// Reads the CSV body of a file written by [`Table::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let columns = header.into_iter().map(|h| &*Box::leak(h.into_boxed_str())).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(Self { columns, rows, meta: Vec::new() })
    }
}
