use serde::Serialize;

use super::special::{chi_square_sf, student_t_two_sided_p};
use super::stats::{mean, sample_variance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of homogeneity for an r×k table of counts
/// (rows are groups).
pub fn chi_square_homogeneity(counts: &[Vec<f64>]) -> Result<ChiSquareResult> {
    let r = counts.len();
    if r < 2 {
        return Err(Error::InvalidInput("need at least two groups".into()));
    }
    let k = counts[0].len();
    if k < 2 || counts.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidInput("rows must share at least two categories".into()));
    }
    if counts.iter().flatten().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidInput("counts must be finite and non-negative".into()));
    }
    let row_tot: Vec<f64> = counts.iter().map(|row| row.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..k).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
    if row_tot.iter().chain(&col_tot).any(|&m| m <= 0.0) {
        return Err(Error::ZeroMarginal);
    }
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    for i in 0..r {
        for j in 0..k {
            let expected = row_tot[i] * col_tot[j] / total;
            stat += (counts[i][j] - expected).powi(2) / expected;
        }
    }
    let df = (r - 1) * (k - 1);
    Ok(ChiSquareResult {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Paired t-test of `after − before`.
pub fn paired_t_test(before: &[f64], after: &[f64]) -> Result<PairedTTest> {
    if before.len() != after.len() {
        return Err(Error::InvalidInput("paired samples differ in length".into()));
    }
    if before.len() < 2 {
        return Err(Error::InvalidInput("paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).collect();
    let m = mean(&d);
    let se = (sample_variance(&d) / d.len() as f64).sqrt();
    let t = if se > 0.0 {
        m / se
    } else if m == 0.0 {
        0.0
    } else {
        m.signum() * f64::INFINITY
    };
    let df = d.len() - 1;
    Ok(PairedTTest {
        mean_difference: m,
        t,
        df,
        p_value: student_t_two_sided_p(t, df as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_proportions() {
        let res = chi_square_homogeneity(&[vec![30.0, 70.0], vec![60.0, 140.0]]).unwrap();
        assert!(res.statistic.abs() < 1e-12);
        assert!((res.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, c, d) = (12.0, 5.0, 7.0, 19.0);
        let res = chi_square_homogeneity(&[vec![a, b], vec![c, d]]).unwrap();
        let n = a + b + c + d;
        let oracle = (a * d - b * c).powi(2) * n / ((a + b) * (c + d) * (a + c) * (b + d));
        assert!((res.statistic - oracle).abs() < 1e-10);
        assert_eq!(res.df, 1);
    }

    #[test]
    fn zero_marginal_is_error() {
        assert!(matches!(
            chi_square_homogeneity(&[vec![0.0, 3.0], vec![0.0, 4.0]]),
            Err(Error::ZeroMarginal)
        ));
    }

    #[test]
    fn paired_t_by_hand() {
        let before = [1.0, 2.0, 3.0, 4.0];
        let after = [2.0, 2.5, 4.5, 5.0];
        // d = 1, .5, 1.5, 1: mean 1, sd² = 1/6
        let res = paired_t_test(&before, &after).unwrap();
        let t = 1.0 / (1.0f64 / 6.0 / 4.0).sqrt();
        assert!((res.t - t).abs() < 1e-12);
        assert_eq!(res.df, 3);
        assert!(res.p_value > 0.0 && res.p_value < 0.05);
    }
}
