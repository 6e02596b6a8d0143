use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Regressor matrix with named columns and per-row keys (dataset unit indices).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    names: Vec<String>,
    values: DMatrix<f64>,
    row_keys: Vec<usize>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, values: DMatrix<f64>, row_keys: Vec<usize>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if row_keys.len() != values.nrows() {
            return Err(Error::InvalidInput("row key count differs from row count".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate column name `{dup}`")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value in column `{}` row {r}",
                names[c]
            )));
        }
        Ok(DesignMatrix {
            names,
            values,
            row_keys,
        })
    }

    /// Builds `[1, x_1, …, x_k]` from row-major covariate rows.
    pub fn with_intercept(covariate_names: &[String], rows: &[Vec<f64>], row_keys: Vec<usize>) -> Result<Self> {
        let k = covariate_names.len() + 1;
        let mut values = DMatrix::zeros(rows.len(), k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != covariate_names.len() {
                return Err(Error::InvalidInput(format!("row {i} has {} values", row.len())));
            }
            values[(i, 0)] = 1.0;
            for (j, v) in row.iter().enumerate() {
                values[(i, j + 1)] = *v;
            }
        }
        let mut names = Vec::with_capacity(k);
        names.push("(intercept)".to_string());
        names.extend(covariate_names.iter().cloned());
        DesignMatrix::new(names, values, row_keys)
    }

    pub fn intercept_only(n: usize, row_keys: Vec<usize>) -> Result<Self> {
        DesignMatrix::new(vec!["(intercept)".into()], DMatrix::from_element(n, 1, 1.0), row_keys)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row_keys(&self) -> &[usize] {
        &self.row_keys
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Rows selected by position, keeping their keys.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let values = self.values.select_rows(rows.iter());
        DesignMatrix {
            names: self.names.clone(),
            values,
            row_keys: rows.iter().map(|&r| self.row_keys[r]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 1.0, 2.0]);
        assert!(DesignMatrix::new(vec!["a".into(), "b".into()], m, vec![0, 1]).is_err());
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(DesignMatrix::new(vec!["a".into(), "a".into()], m, vec![0]).is_err());
    }
}
