use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{critical_from_sup, iqr_se, is_degenerate, p_value, BandResult, BootstrapSpec};
use crate::gtdid::AggregateRow;
use crate::{Error, Result};

/// Multiplier bootstrap with one multiplier per unit shared across rows.
///
/// `influence[r]` is row r's dataset-scale influence vector (one entry per
/// unit); draw b perturbs row r by `mean_i(V_i·φ_ir)`. Replication b uses
/// stream b of a generator keyed by the spec seed, so results do not depend
/// on thread scheduling.
pub fn multiplier_bootstrap(estimates: &[f64], influence: &[Vec<f64>], spec: &BootstrapSpec) -> Result<BandResult> {
    spec.validate()?;
    let rows = estimates.len();
    if rows == 0 || influence.len() != rows {
        return Err(Error::InvalidInput("need one influence vector per estimate".into()));
    }
    let n = influence[0].len();
    if n == 0 || influence.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("influence vectors must share a non-zero length".into()));
    }

    let draws: Vec<Vec<f64>> = (0..spec.reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(b as u64);
            let mut d = vec![0.0; rows];
            for i in 0..n {
                let v = spec.law.draw(&mut rng);
                for (r, acc) in d.iter_mut().enumerate() {
                    *acc += v * influence[r][i];
                }
            }
            d.iter_mut().for_each(|x| *x /= n as f64);
            d
        })
        .collect();

    let mut se = Vec::with_capacity(rows);
    let mut degenerate = Vec::new();
    for r in 0..rows {
        let mut col: Vec<f64> = draws.iter().map(|d| d[r]).collect();
        col.sort_by(f64::total_cmp);
        let s = iqr_se(&col);
        let scale = influence[r].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if is_degenerate(s, scale) {
            degenerate.push(r);
            se.push(0.0);
        } else {
            se.push(s);
        }
    }
    let active: Vec<usize> = (0..rows).filter(|r| !degenerate.contains(r)).collect();
    let mut sup: Vec<f64> = draws
        .iter()
        .map(|d| active.iter().map(|&r| d[r].abs() / se[r]).fold(0.0, f64::max))
        .collect();
    sup.sort_by(f64::total_cmp);
    let (c, summary) = critical_from_sup(spec, &sup, active.len());

    let bounds = (0..rows).map(|r| (estimates[r] - c * se[r], estimates[r] + c * se[r])).collect();
    let p_values = (0..rows).map(|r| p_value(estimates[r], se[r], degenerate.contains(&r))).collect();
    Ok(BandResult {
        estimates: estimates.to_vec(),
        se,
        critical_value: c,
        pointwise_critical: spec.pointwise_critical(),
        band: spec.band,
        level: spec.level,
        bounds,
        p_values,
        degenerate,
        rejected_draws: 0,
        reps: spec.reps,
        sup_t_quantiles: summary,
    })
}

/// Bootstraps the rows that have an estimate; missing rows are skipped and
/// keep their position in [`crate::gtdid::EffectTable::from_rows`].
pub fn multiplier_bootstrap_rows(rows: &[AggregateRow], spec: &BootstrapSpec) -> Result<BandResult> {
    let present: Vec<&AggregateRow> = rows.iter().filter(|r| r.estimate.is_some()).collect();
    if present.is_empty() {
        return Err(Error::Estimation("no identified rows to bootstrap".into()));
    }
    let est: Vec<f64> = present.iter().map(|r| r.estimate.unwrap()).collect();
    let infl: Vec<Vec<f64>> = present.iter().map(|r| r.influence.clone()).collect();
    multiplier_bootstrap(&est, &infl, spec)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::inference::{BandType, WeightLaw};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let m = v.iter().sum::<f64>() / n as f64;
        v.into_iter().map(|x| x - m).collect()
    }

    #[test]
    fn duplicated_rows_share_se() {
        let phi = gaussian(300, 1);
        let spec = BootstrapSpec::default();
        let res = multiplier_bootstrap(&[1.0, 2.0, 3.0], &[phi.clone(), phi.clone(), phi], &spec).unwrap();
        assert_eq!(res.se[0], res.se[1]);
        assert_eq!(res.se[1], res.se[2]);
    }

    #[test]
    fn single_row_critical_is_normal() {
        let phi = gaussian(500, 2);
        let spec = BootstrapSpec {
            reps: 9999,
            ..Default::default()
        };
        let res = multiplier_bootstrap(&[0.3], &[phi], &spec).unwrap();
        assert!((res.critical_value - 1.96).abs() < 0.1, "c = {}", res.critical_value);
    }

    #[test]
    fn reproducible_and_simultaneous_contains_pointwise() {
        let rows: Vec<Vec<f64>> = (0..4).map(|k| gaussian(200, 10 + k)).collect();
        let est = [0.1, -0.2, 0.05, 0.4];
        let spec = BootstrapSpec {
            seed: 77,
            ..Default::default()
        };
        let a = multiplier_bootstrap(&est, &rows, &spec).unwrap();
        let b = multiplier_bootstrap(&est, &rows, &spec).unwrap();
        assert_eq!(a, b);
        let pw = multiplier_bootstrap(&est, &rows, &BootstrapSpec { band: BandType::Pointwise, ..spec }).unwrap();
        assert!(a.critical_value >= pw.critical_value);
        for r in 0..4 {
            assert!(a.bounds[r].0 <= pw.bounds[r].0 && a.bounds[r].1 >= pw.bounds[r].1);
        }
    }

    #[test]
    fn zero_influence_is_degenerate() {
        let res = multiplier_bootstrap(&[2.0, 0.0], &[vec![0.0; 10], vec![0.0; 10]], &BootstrapSpec::default()).unwrap();
        assert_eq!(res.degenerate, vec![0, 1]);
        assert_eq!(res.p_values, vec![0.0, 1.0]);
        assert_eq!(res.bounds[0], (2.0, 2.0));
    }

    #[test]
    fn scaling_scales_se() {
        let phi = gaussian(100, 5);
        let scaled: Vec<f64> = phi.iter().map(|x| 3.0 * x).collect();
        let spec = BootstrapSpec {
            law: WeightLaw::Rademacher,
            ..Default::default()
        };
        let a = multiplier_bootstrap(&[1.0], &[phi], &spec).unwrap();
        let b = multiplier_bootstrap(&[3.0], &[scaled], &spec).unwrap();
        assert!((b.se[0] - 3.0 * a.se[0]).abs() < 1e-12);
        assert!((b.p_values[0] - a.p_values[0]).abs() < 1e-12);
    }

    #[test]
    fn gaussian_simultaneous_coverage() {
        // X_i ∈ R⁵ with X_ir = z0_i + z_ir: unit variances 2, correlation 1/2,
        // true mean zero. Estimates are sample means, φ the centred data.
        let n = 300;
        let reps = 500;
        let mut covered = 0;
        for rep in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let common: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut est = Vec::new();
            let mut rows = Vec::new();
            for _ in 0..5 {
                let x: Vec<f64> = common.iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect();
                let m = x.iter().sum::<f64>() / n as f64;
                est.push(m);
                rows.push(x.iter().map(|v| v - m).collect::<Vec<f64>>());
            }
            let spec = BootstrapSpec {
                reps: 499,
                seed: rep,
                ..Default::default()
            };
            let res = multiplier_bootstrap(&est, &rows, &spec).unwrap();
            if res.bounds.iter().all(|b| b.0 <= 0.0 && 0.0 <= b.1) {
                covered += 1;
            }
        }
        let cov = covered as f64 / reps as f64;
        assert!((0.93..=0.97).contains(&cov), "coverage {cov}");
    }
}
