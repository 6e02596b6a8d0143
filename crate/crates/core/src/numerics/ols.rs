use nalgebra::{DMatrix, DVector};

use super::{DesignMatrix, FitResult};
use crate::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

/// (Weighted) least squares through a singular value decomposition of the
/// column-normalised design.
pub fn fit_ols(x: &DesignMatrix, y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} responses for {n} rows", y.len())));
    }
    if n < k {
        return Err(Error::InvalidInput(format!("{n} rows for {k} columns")));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite, non-negative and one per row".into()));
        }
    }
    let root_w: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; n],
    };

    let mut a = x.values().clone();
    for (i, rw) in root_w.iter().enumerate() {
        a.row_mut(i).scale_mut(*rw);
    }
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(n, y.iter().zip(&root_w).map(|(v, w)| v * w));

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let v_t = svd.v_t.as_ref().expect("V requested");
    let u = svd.u.as_ref().expect("U requested");
    let mut collinear = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if !(s > RANK_TOL * smax) {
            for j in 0..k {
                if v_t[(i, j)].abs() > 1e-6 && !collinear.contains(&x.names()[j]) {
                    collinear.push(x.names()[j].clone());
                }
            }
        }
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }

    // β̃ = V Σ⁻¹ Uᵀ b
    let utb = u.tr_mul(&b);
    let scaled = DVector::from_iterator(k, utb.iter().zip(sv.iter()).map(|(c, s)| c / s));
    let beta_tilde = v_t.tr_mul(&scaled);
    let coefficients: Vec<f64> = beta_tilde.iter().zip(&scale).map(|(b, s)| b / s).collect();

    let fitted = x.values() * DVector::from_column_slice(&coefficients);
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - fitted[i];
            root_w[i] * root_w[i] * r * r
        })
        .sum();

    let covariance = (n > k).then(|| {
        let sigma2 = rss / (n - k) as f64;
        // (AᵀA)⁻¹ = V Σ⁻² Vᵀ on the normalised scale.
        let mut inv = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for (r, s) in sv.iter().enumerate() {
                    acc += v_t[(r, i)] * v_t[(r, j)] / (s * s);
                }
                inv[(i, j)] = sigma2 * acc / (scale[i] * scale[j]);
            }
        }
        (&inv + inv.transpose()) * 0.5
    });

    Ok(FitResult {
        names: x.names().to_vec(),
        coefficients,
        converged: true,
        iterations: 1,
        covariance,
        objective: rss,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn design(rows: &[Vec<f64>], names: &[&str]) -> DesignMatrix {
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        DesignMatrix::with_intercept(&names, rows, (0..rows.len()).collect()).unwrap()
    }

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 3.0 + 2.0 * i as f64).collect();
        let fit = fit_ols(&design(&rows, &["x"]), &y, None).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_is_mean() {
        let y = [1.0, 4.0, 2.5, 8.0];
        let x = DesignMatrix::intercept_only(4, (0..4).collect()).unwrap();
        let fit = fit_ols(&x, &y, None).unwrap();
        assert!((fit.coefficients[0] - 3.875).abs() < 1e-14);
    }

    #[test]
    fn matches_normal_equations_and_residuals_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random::<f64>() * 4.0, rng.random::<f64>() - 0.5]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + r[0] - 2.0 * r[1] + rng.random::<f64>()).collect();
        let x = design(&rows, &["a", "b"]);
        let w: Vec<f64> = (0..20).map(|i| 0.5 + (i % 4) as f64).collect();
        for weights in [None, Some(w.as_slice())] {
            let fit = fit_ols(&x, &y, weights).unwrap();

            // Oracle: (XᵀWX)⁻¹ XᵀWy by explicit inversion.
            let xv = x.values();
            let wv = DMatrix::from_diagonal(&DVector::from_iterator(20, (0..20).map(|i| weights.map_or(1.0, |w| w[i]))));
            let xtwx = xv.transpose() * &wv * xv;
            let xtwy = xv.transpose() * &wv * DVector::from_column_slice(&y);
            let oracle = xtwx.try_inverse().unwrap() * xtwy;
            for j in 0..3 {
                assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-8);
            }
            let fitted = fit.linear_predictor(&x);
            for j in 0..3 {
                let dot: f64 = (0..20)
                    .map(|i| weights.map_or(1.0, |w| w[i]) * xv[(i, j)] * (y[i] - fitted[i]))
                    .sum();
                assert!(dot.abs() < 1e-8, "column {j}: {dot}");
            }
            let cov = fit.covariance.unwrap();
            assert!((cov.clone() - cov.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn collinear_columns_are_named() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, (i * i) as f64]).collect();
        let y = [1.0, 2.0, 3.0, 5.0, 4.0];
        match fit_ols(&design(&rows, &["a", "b", "c"]), &y, None) {
            Err(Error::RankDeficient { columns }) => {
                assert!(columns.contains(&"a".to_string()));
                assert!(columns.contains(&"b".to_string()));
                assert!(!columns.contains(&"c".to_string()));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
