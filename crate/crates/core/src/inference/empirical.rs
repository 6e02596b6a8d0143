use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{critical_from_sup, iqr_se, is_degenerate, p_value, BandResult, BandType, BootstrapSpec};
use crate::numerics::quantile_sorted;
use crate::panel::PanelDataset;
use crate::{Error, Result};

/// Redraw budget per replication before giving up.
const MAX_ATTEMPTS: usize = 1000;

fn resample(ds: &PanelDataset, rng: &mut ChaCha8Rng, cohorts: &BTreeSet<i32>) -> Option<Result<PanelDataset>> {
    let n = ds.len();
    let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let drawn: BTreeSet<i32> = picks.iter().map(|&i| ds.units()[i].cohort).collect();
    if &drawn != cohorts {
        return None;
    }
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let units = picks
        .iter()
        .map(|&i| {
            let k = seen.entry(i).or_insert(0);
            *k += 1;
            let mut u = ds.units()[i].clone();
            if *k > 1 {
                u.id = format!("{}#{}", u.id, k);
            }
            u
        })
        .collect();
    Some(ds.with_units(units))
}

/// Nonparametric bootstrap: resample units with replacement and rerun
/// `estimator` on each resample.
///
/// A resample that loses one of the original cohorts, or on which some row
/// cannot be estimated, is rejected and redrawn; the count is reported.
/// Pointwise bands are percentile intervals; simultaneous bands use the
/// sup-t critical value of the centred draws.
pub fn empirical_bootstrap<F>(ds: &PanelDataset, estimator: F, spec: &BootstrapSpec) -> Result<BandResult>
where
    F: Fn(&PanelDataset) -> Result<Vec<Option<f64>>> + Sync,
{
    spec.validate()?;
    let estimates: Vec<f64> = estimator(ds)?
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Estimation("estimator leaves a row unidentified on the full sample".into()))?;
    let rows = estimates.len();
    if rows == 0 {
        return Err(Error::Estimation("estimator returned no rows".into()));
    }
    let cohorts: BTreeSet<i32> = ds.cohorts().into_iter().collect();

    let results: Vec<Result<(Vec<f64>, usize)>> = (0..spec.reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(b as u64);
            let mut rejected = 0;
            for _ in 0..MAX_ATTEMPTS {
                let Some(sample) = resample(ds, &mut rng, &cohorts) else {
                    rejected += 1;
                    continue;
                };
                let est = estimator(&sample?)?;
                match est.into_iter().collect::<Option<Vec<f64>>>() {
                    Some(v) if v.len() == rows => return Ok((v, rejected)),
                    _ => rejected += 1,
                }
            }
            Err(Error::Estimation(format!("replication {b}: no usable resample in {MAX_ATTEMPTS} attempts")))
        })
        .collect();
    let mut draws = Vec::with_capacity(spec.reps);
    let mut rejected_draws = 0;
    for r in results {
        let (v, rej) = r?;
        draws.push(v);
        rejected_draws += rej;
    }

    let alpha = 1.0 - spec.level;
    let mut se = Vec::with_capacity(rows);
    let mut degenerate = Vec::new();
    let mut percentile = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut col: Vec<f64> = draws.iter().map(|d| d[r]).collect();
        col.sort_by(f64::total_cmp);
        let s = iqr_se(&col);
        if is_degenerate(s, estimates[r].abs()) {
            degenerate.push(r);
            se.push(0.0);
        } else {
            se.push(s);
        }
        let lo = quantile_sorted(&col, alpha / 2.0).min(estimates[r]);
        let hi = quantile_sorted(&col, 1.0 - alpha / 2.0).max(estimates[r]);
        percentile.push((lo, hi));
    }
    let active: Vec<usize> = (0..rows).filter(|r| !degenerate.contains(r)).collect();
    let mut sup: Vec<f64> = draws
        .iter()
        .map(|d| active.iter().map(|&r| (d[r] - estimates[r]).abs() / se[r]).fold(0.0, f64::max))
        .collect();
    sup.sort_by(f64::total_cmp);
    let (c, summary) = critical_from_sup(spec, &sup, active.len());
    let bounds = match spec.band {
        BandType::Pointwise => (0..rows)
            .map(|r| if degenerate.contains(&r) { (estimates[r], estimates[r]) } else { percentile[r] })
            .collect(),
        BandType::Simultaneous => (0..rows).map(|r| (estimates[r] - c * se[r], estimates[r] + c * se[r])).collect(),
    };
    let p_values = (0..rows).map(|r| p_value(estimates[r], se[r], degenerate.contains(&r))).collect();
    Ok(BandResult {
        estimates,
        se,
        critical_value: c,
        pointwise_critical: spec.pointwise_critical(),
        band: spec.band,
        level: spec.level,
        bounds,
        p_values,
        degenerate,
        rejected_draws,
        reps: spec.reps,
        sup_t_quantiles: summary,
    })
}
