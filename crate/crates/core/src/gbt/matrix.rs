use std::collections::HashSet;

use crate::error::{Error, Result};

/// Dense row-major matrix of explanatory variables. NaN marks a missing
/// value; every other entry must be finite.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n_cols = names.len();
        if n_cols == 0 {
            return Err(Error::invalid("feature matrix needs at least one column"));
        }
        if values.len() % n_cols != 0 {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of {} columns",
                values.len(),
                n_cols
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::invalid(format!("duplicate column name `{n}`")));
            }
        }
        if let Some(pos) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::invalid(format!(
                "infinite value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self { n_rows: values.len() / n_cols, n_cols, values, names })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = names.len();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::invalid(format!("row {i} has {} values, expected {n_cols}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self { n_rows: idx.len(), n_cols: self.n_cols, values, names: self.names.clone() }
    }

    /// Returns a copy where the given columns are set to missing.
    pub fn mask_columns(&self, cols: &[usize]) -> Self {
        let mut out = self.clone();
        for r in 0..out.n_rows {
            for &c in cols {
                out.values[r * out.n_cols + c] = f64::NAN;
            }
        }
        out
    }
}
