use nalgebra::{DMatrix, DVector};

use super::{DesignMatrix, FitResult, FitWarning};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Bound on the largest absolute score component (columns scaled to unit
    /// max-abs).
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// |η| beyond which fitted probabilities are within 1e-15 of 0 or 1.
const SEPARATION_ETA: f64 = 35.0;

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Some(chol.solve(g));
    }
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    svd.solve(g, smax * 1e-12).ok()
}

/// Bernoulli maximum likelihood by Newton–Raphson (IRLS) with step halving.
///
/// Perfect or quasi-complete separation is reported as `converged = false`
/// with [`FitWarning::Separation`]; the coefficients are the last iterate.
pub fn fit_logistic(x: &DesignMatrix, y: &[f64], opts: LogisticOptions) -> Result<FitResult> {
    let n = x.nrows();
    let k = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} responses for {n} rows", y.len())));
    }
    if n < k {
        return Err(Error::InvalidInput(format!("{n} rows for {k} columns")));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("logistic response must be 0/1".into()));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::OneClass);
    }

    // Column scaling keeps the Hessian well conditioned for covariates
    // measured in large units (income in DKK).
    let raw = x.values();
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let m = raw.column(j).amax();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = raw.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let yv = DVector::from_column_slice(y);

    let mut beta = DVector::zeros(k);
    let mut eta = &xs * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut converged = false;
    let mut warning = None;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let p = eta.map(sigmoid);
        let grad = xs.tr_mul(&(&yv - &p));
        if grad.amax() < opts.tol {
            converged = true;
            break;
        }
        if eta.amax() > SEPARATION_ETA {
            warning = Some(FitWarning::Separation);
            break;
        }
        let w = p.map(|pi| pi * (1.0 - pi));
        let mut xw = xs.clone();
        for (i, wi) in w.iter().enumerate() {
            xw.row_mut(i).scale_mut(*wi);
        }
        let h = xs.tr_mul(&xw);
        let Some(step) = solve_spd(&h, &grad) else {
            warning = Some(FitWarning::Separation);
            break;
        };
        let decrement = grad.dot(&step);
        iterations += 1;

        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-10 {
            let cand = &beta + &step * s;
            let cand_eta = &xs * &cand;
            let cand_ll = log_likelihood(&cand_eta, y);
            if cand_ll >= ll - 1e-12 * (1.0 + ll.abs()) {
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted || decrement.abs() < 1e-20 {
            // No further ascent available at machine precision.
            let p = eta.map(sigmoid);
            let grad = xs.tr_mul(&(&yv - &p));
            converged = grad.amax() < opts.tol.sqrt() && eta.amax() <= SEPARATION_ETA;
            if !converged && eta.amax() > SEPARATION_ETA {
                warning = Some(FitWarning::Separation);
            }
            break;
        }
    }
    if !converged && warning.is_none() {
        warning = Some(if eta.amax() > SEPARATION_ETA {
            FitWarning::Separation
        } else {
            FitWarning::IterationLimit
        });
    }

    let p = eta.map(sigmoid);
    let w = p.map(|pi| pi * (1.0 - pi));
    let mut xw = xs.clone();
    for (i, wi) in w.iter().enumerate() {
        xw.row_mut(i).scale_mut(*wi);
    }
    let h = xs.tr_mul(&xw);
    let covariance = h.try_inverse().map(|inv| {
        let mut c = inv;
        for i in 0..k {
            for j in 0..k {
                c[(i, j)] /= scale[i] * scale[j];
            }
        }
        (&c + c.transpose()) * 0.5
    });
    let coefficients: Vec<f64> = beta.iter().zip(&scale).map(|(b, s)| b / s).collect();

    Ok(FitResult {
        names: x.names().to_vec(),
        coefficients,
        converged,
        iterations,
        covariance,
        objective: ll,
        warning,
    })
}

/// Fitted probabilities for the rows of `x`.
pub fn predict_logistic(fit: &FitResult, x: &DesignMatrix) -> Vec<f64> {
    fit.linear_predictor(x).into_iter().map(sigmoid).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(xs: &[f64]) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        DesignMatrix::with_intercept(&["x".to_string()], &rows, (0..xs.len()).collect()).unwrap()
    }

    #[test]
    fn intercept_only_closed_form() {
        let y = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let x = DesignMatrix::intercept_only(8, (0..8).collect()).unwrap();
        let fit = fit_logistic(&x, &y, LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-10);
    }

    #[test]
    fn mirrored_data_has_zero_slope() {
        let xs = [-2.0, -1.0, 0.5, 1.5, 3.0];
        let ys = [1.0, 0.0, 1.0, 1.0, 0.0];
        let mut all_x = xs.to_vec();
        let mut all_y = ys.to_vec();
        all_x.extend_from_slice(&xs);
        all_y.extend(ys.iter().map(|v| 1.0 - v));
        let fit = fit_logistic(&design(&all_x), &all_y, LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[1].abs() < 1e-10);
        assert!(fit.coefficients[0].abs() < 1e-10);
    }

    #[test]
    fn matches_grid_search_maximizer() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let fit = fit_logistic(&design(&xs), &ys, LogisticOptions::default()).unwrap();

        // Brute-force likelihood maximisation on successively finer grids.
        let ll = |a: f64, b: f64| -> f64 {
            xs.iter()
                .zip(&ys)
                .map(|(&x, &y)| {
                    let e = a + b * x;
                    y * e - softplus(e)
                })
                .sum()
        };
        let (mut ca, mut cb, mut width) = (0.0f64, 0.0f64, 8.0f64);
        for _ in 0..30 {
            let mut best = (f64::NEG_INFINITY, ca, cb);
            for i in 0..=40 {
                for j in 0..=40 {
                    let a = ca - width + 2.0 * width * i as f64 / 40.0;
                    let b = cb - width + 2.0 * width * j as f64 / 40.0;
                    let v = ll(a, b);
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
            }
            ca = best.1;
            cb = best.2;
            width *= 0.25;
        }
        assert!((fit.coefficients[0] - ca).abs() < 1e-4, "{} vs {ca}", fit.coefficients[0]);
        assert!((fit.coefficients[1] - cb).abs() < 1e-4, "{} vs {cb}", fit.coefficients[1]);
    }

    #[test]
    fn separation_is_flagged() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_logistic(&design(&xs), &ys, LogisticOptions::default()).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.warning, Some(FitWarning::Separation));
    }

    #[test]
    fn one_class_is_error() {
        let x = DesignMatrix::intercept_only(3, vec![0, 1, 2]).unwrap();
        assert!(matches!(
            fit_logistic(&x, &[1.0, 1.0, 1.0], LogisticOptions::default()),
            Err(Error::OneClass)
        ));
    }

    #[test]
    fn score_equation_mean_matches() {
        // Large-scale covariate exercises the column scaling.
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|i| 150_000.0 + 173.0 * ((i * 37) % 101) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|i| if (i * 7919) % 13 < 5 + (i % 3) { 1.0 } else { 0.0 }).collect();
        let x = design(&xs);
        let fit = fit_logistic(&x, &ys, LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        let p = predict_logistic(&fit, &x);
        let mp = p.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        assert!((mp - my).abs() < 1e-8);
        let cov = fit.covariance.unwrap();
        assert!((cov[(0, 1)] - cov[(1, 0)]).abs() < 1e-12 * cov[(0, 1)].abs().max(1e-300));
    }
}
