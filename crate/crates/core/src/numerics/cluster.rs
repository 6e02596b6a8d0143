use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Cluster-robust sandwich `(XᵀX)⁻¹ (Σ_g s_g s_gᵀ) (XᵀX)⁻¹` with the
/// small-sample factor `G/(G−1)·(n−1)/(n−k)`.
///
/// `k` is the number of estimated parameters; pass more than `x.ncols()`
/// when fixed effects were partialled out and should count.
pub fn cluster_robust_cov(x: &DMatrix<f64>, resid: &[f64], clusters: &[usize], k: usize) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    if resid.len() != n || clusters.len() != n {
        return Err(Error::InvalidInput("residuals and clusters must have one entry per row".into()));
    }
    let mut scores: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        let s = scores.entry(clusters[i]).or_insert_with(|| DVector::zeros(p));
        for j in 0..p {
            s[j] += x[(i, j)] * resid[i];
        }
    }
    let g = scores.len();
    if g < 2 {
        return Err(Error::SingleCluster);
    }
    if n <= k {
        return Err(Error::InvalidInput(format!("{n} rows for {k} parameters")));
    }
    let mut meat = DMatrix::zeros(p, p);
    for s in scores.values() {
        meat += s * s.transpose();
    }
    let bread = x
        .tr_mul(x)
        .try_inverse()
        .ok_or_else(|| Error::Estimation("XᵀX is singular".into()))?;
    let factor = g as f64 / (g as f64 - 1.0) * (n as f64 - 1.0) / (n - k) as f64;
    let v = &bread * meat * &bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}

/// Heteroskedasticity-robust (HC1) covariance, the one-observation-per-cluster
/// case of [`cluster_robust_cov`].
pub fn hc1_cov(x: &DMatrix<f64>, resid: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    let v = cluster_robust_cov(x, resid, &(0..n).collect::<Vec<_>>(), p)?;
    // Cluster factor n/(n−1)·(n−1)/(n−k) already equals HC1's n/(n−k).
    Ok(v)
}
