//! Numeric CSV tables: comma-separated, one header row, decimal point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use olsatt::fmt_f64;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Rows = observations, columns in header order.
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        self.column_index(name).map(|k| self.values.column(k).into_owned())
    }

    /// Columns `names` in the given order.
    pub fn select(&self, names: &[String]) -> CliResult<DMatrix<f64>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| CliError::Data(format!("column '{n}' not found")))
            })
            .collect::<CliResult<_>>()?;
        Ok(DMatrix::from_fn(self.values.nrows(), idx.len(), |i, k| {
            self.values[(i, idx[k])]
        }))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

fn parse_cell(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a numeric CSV. A column with no numeric value at all is reported
/// as [`CliError::NonNumericColumn`]; a stray bad cell as [`CliError::Parse`].
pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    read_table_from(file)
}

pub fn read_table_from<R: std::io::Read>(input: R) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::Data("CSV has no header".into()));
    }
    let p = headers.len();
    let mut raw: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != p {
            return Err(CliError::Parse {
                row: i + 1,
                column: String::new(),
                message: format!("expected {p} fields, found {}", record.len()),
            });
        }
        raw.push(record.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(CliError::Data("CSV has no data rows".into()));
    }
    for (k, name) in headers.iter().enumerate() {
        if raw.iter().all(|r| parse_cell(&r[k]).is_none()) {
            return Err(CliError::NonNumericColumn {
                column: name.clone(),
                row: 1,
                value: raw[0][k].clone(),
            });
        }
    }
    let mut values = DMatrix::zeros(raw.len(), p);
    for (i, row) in raw.iter().enumerate() {
        for (k, cell) in row.iter().enumerate() {
            values[(i, k)] = parse_cell(cell).ok_or_else(|| CliError::Parse {
                row: i + 1,
                column: headers[k].clone(),
                message: format!("'{cell}' is not a finite number"),
            })?;
        }
    }
    Ok(Table { headers, values })
}

/// Writes a header and rows of numbers at 17 significant digits.
pub fn write_table(path: &Path, headers: &[String], rows: &DMatrix<f64>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{}", headers.join(","))?;
        for r in rows.row_iter() {
            let fields: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| CliError::io(path.display(), e))
}
