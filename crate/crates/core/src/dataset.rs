//! Dense row-major design matrix with binary labels, the input to the
//! resamplers and learners.

use crate::error::{Error, Result};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    x: Vec<f64>,
    y: Vec<u8>,
}

impl Dataset {
    pub fn new(names: Vec<String>, x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        let p = names.len();
        if p == 0 {
            return Err(Error::Data("dataset needs at least one feature".into()));
        }
        if x.len() != p * y.len() {
            return Err(Error::Data(format!(
                "{} cells do not fill {} rows of {p} features",
                x.len(),
                y.len()
            )));
        }
        if let Some(l) = y.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {l} is not 0/1")));
        }
        Ok(Dataset { names, x, y })
    }

    /// Predictors and target of a fully imputed table.
    pub fn from_table(table: &Table) -> Result<Self> {
        let y = table.labels()?;
        let cols: Vec<_> = table.predictors().collect();
        for c in &cols {
            if c.missing_count() > 0 {
                return Err(Error::Data(format!(
                    "column `{}` still has {} missing cells",
                    c.name(),
                    c.missing_count()
                )));
            }
        }
        let mut x = Vec::with_capacity(cols.len() * y.len());
        for i in 0..y.len() {
            x.extend(cols.iter().map(|c| c.raw_values()[i]));
        }
        Dataset::new(cols.iter().map(|c| c.name().to_string()).collect(), x, y)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.names.len();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.names.len())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Number of rows per class, `[zeros, ones]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - ones, ones]
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            names: self.names.clone(),
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}
