//! Continuous observational datasets and their CSV representation.
//!
//! The on-disk format is a comma-separated file with a header row of unique
//! variable names followed by one row per sample. Values are written with the
//! shortest representation that parses back to the identical `f64`, so a
//! save/load cycle is bitwise lossless.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An `n x p` matrix of finite observations, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::invalid(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.len() < 2 {
            return Err(Error::invalid("a dataset needs at least two variables"));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::invalid("a dataset needs at least one sample"));
        }
        let mut seen = HashSet::new();
        for (name, col) in names.iter().zip(&columns) {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate variable name `{name}`")));
            }
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "column `{name}` has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell {
                    row: row + 1,
                    column: name.clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        Ok(Self { names, columns })
    }

    /// Builds a dataset with generated names `X0, X1, ...`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..columns.len()).map(|i| format!("X{i}")).collect();
        Self::new(names, columns)
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Returns a copy with variables reordered so that new column `k` is old column `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let names = order.iter().map(|&j| self.names[j].clone()).collect();
        let columns = order.iter().map(|&j| self.columns[j].clone()).collect();
        Self::new(names, columns)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate header name `{name}`")));
            }
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 1;
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::Cell {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", names.len(), record.len()),
                });
            }
            for ((cell, name), col) in record.iter().zip(&names).zip(columns.iter_mut()) {
                let value: f64 = cell.trim().parse().map_err(|_| Error::Cell {
                    row,
                    column: name.clone(),
                    message: format!("not a number: `{cell}`"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Cell {
                        row,
                        column: name.clone(),
                        message: format!("non-finite value `{cell}`"),
                    });
                }
                col.push(value);
            }
        }
        Self::new(names, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let mut row = Vec::with_capacity(self.p());
        for i in 0..self.n() {
            row.clear();
            row.extend(self.columns.iter().map(|c| c[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    Dataset::read_csv(std::io::BufReader::new(file))
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    data.write_csv(std::io::BufWriter::new(file))
}
