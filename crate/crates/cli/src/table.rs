//! Versioned CSV tables. The first line is `# mec-auction <kind> v<N>`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::CliError;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Rounds,
    Sweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Rounds => "rounds",
            Kind::Sweep => "sweep",
        }
    }

    fn header(self) -> String {
        format!("# mec-auction {} v{VERSION}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: Kind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

impl Table {
    pub fn new(kind: Kind, columns: Vec<String>) -> Self {
        Self { kind, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
        writeln!(file, "{}", self.kind.header()).map_err(|e| CliError::io(path, e))?;
        let csv_err = |source| CliError::Csv { path: path.display().to_string(), source };
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    /// Read any table kind, checking the version line.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let shown = path.display().to_string();
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
        let first = first.trim_end();
        if first.is_empty() {
            return Err(CliError::MissingColumn { path: shown, column: "slot".into() });
        }
        let kind = [Kind::Rounds, Kind::Sweep]
            .into_iter()
            .find(|k| k.header() == first)
            .ok_or_else(|| CliError::UnknownVersion {
                path: shown.clone(),
                found: first.to_string(),
                expected: Kind::Rounds.header(),
            })?;
        let csv_err = |source| CliError::Csv { path: shown.clone(), source };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let columns: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
        }
        Ok(Self { kind, columns, rows })
    }

    pub fn index(&self, column: &str, path: &Path) -> Result<usize, CliError> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| CliError::MissingColumn { path: path.display().to_string(), column: column.into() })
    }

    /// Numeric values of one column; blank or unparsable cells are None.
    pub fn numbers(&self, idx: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.get(idx).and_then(|c| c.parse().ok())).collect()
    }
}
