//! CSV output: comma-separated, one header row, LF line endings, UTF-8,
//! '.' decimal separator. Floats are written with 17 significant digits so
//! parsing a cell recovers the exact binary value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::commands::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub struct CsvFile {
    out: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut csv = CsvFile {
            out: BufWriter::new(file),
        };
        csv.raw_row(header.iter().map(|c| c.to_string()))?;
        Ok(csv)
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        self.raw_row(cells.iter().cloned())
    }

    fn raw_row(&mut self, cells: impl Iterator<Item = String>) -> Result<(), CliError> {
        let line = cells.collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}
