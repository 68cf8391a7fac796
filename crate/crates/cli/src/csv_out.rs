//! CSV curves: header row, ',' delimiter, '.' decimals, LF line endings.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvCurve {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvCurve {
    pub fn new(header: &[&str]) -> Self {
        CsvCurve {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| fmt_num(x))).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    /// Reads a curve back, requiring a constant column count and numeric cells.
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != header.len() {
                return Err(format!("row {} has {} cells, header has {}", rows.len() + 1, rec.len(), header.len()));
            }
            let row = rec
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(CsvCurve { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
