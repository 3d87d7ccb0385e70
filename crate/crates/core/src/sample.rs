//! Row-major sample storage shared by samplers and estimators.

use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("sample has {values} values, which is not {n} rows of {d} columns")]
    Shape { n: usize, d: usize, values: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `n` observations of a `d`-dimensional vector, one observation per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self, SampleError> {
        if values.len() != n * d {
            return Err(SampleError::Shape { n, d, values: values.len() });
        }
        Ok(Self { n, d, values })
    }

    /// Builds a sample from its columns, which must share one length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, SampleError> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(SampleError::Shape { n, d, values: bad.len() * d });
        }
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Ok(Self { n, d, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.d + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|j| self.column(j)).collect()
    }

    /// Applies `f` to every entry of column `j`.
    pub fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        for i in 0..self.n {
            let v = &mut self.values[i * self.d + j];
            *v = f(*v);
        }
    }

    /// Writes one CSV row per observation with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{v:.16e}");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Parses comma-separated rows. A first line that does not parse as
    /// numbers is taken as a header and skipped.
    pub fn parse_csv(text: &str) -> Result<Self, SampleError> {
        let mut d = None;
        let mut values = Vec::new();
        let mut n = 0;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if n == 0 && d.is_none() => {
                    d = Some(line.split(',').count());
                    continue;
                }
                Err(e) => return Err(SampleError::Parse { line: idx + 1, message: e.to_string() }),
            };
            let width = *d.get_or_insert(row.len());
            if row.len() != width {
                return Err(SampleError::Parse {
                    line: idx + 1,
                    message: format!("expected {width} columns, found {}", row.len()),
                });
            }
            values.extend(row);
            n += 1;
        }
        Ok(Self { n, d: d.unwrap_or(0), values })
    }
}
