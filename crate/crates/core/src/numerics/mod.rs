//! Shared statistical core.

mod cluster;
mod design;
mod logistic;
mod ols;
pub mod special;
mod stats;
mod tests_stat;
mod within;

pub use cluster::{cluster_robust_cov, hc1_cov};
pub use design::DesignMatrix;
pub use logistic::{fit_logistic, predict_logistic, LogisticOptions};
pub use ols::fit_ols;
pub use stats::{mean, quantile_sorted, sample_variance};
pub use tests_stat::{chi_square_homogeneity, paired_t_test, ChiSquareResult, PairedTTest};
pub use within::{within_transform, within_transform_columns, WithinOptions};

use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// Logistic likelihood increases without bound along some direction.
    Separation,
    /// Iteration cap reached before the score criterion was met.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub covariance: Option<DMatrix<f64>>,
    /// Log-likelihood for logistic fits, residual sum of squares for OLS.
    pub objective: f64,
    pub warning: Option<FitWarning>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    /// Linear predictor `Xβ` for each row.
    pub fn linear_predictor(&self, x: &DesignMatrix) -> Vec<f64> {
        let v = x.values();
        (0..v.nrows())
            .map(|i| (0..v.ncols()).map(|j| v[(i, j)] * self.coefficients[j]).sum())
            .collect()
    }
}
