use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::gtdid::{self, AggregationOptions, GtConfig};
use crate::inference::{effect_tables, BootstrapSpec, GtTables};
use crate::numerics::{fit_logistic, mean, predict_logistic, sample_variance, DesignMatrix, LogisticOptions};
use crate::panel::{Gender, PanelDataset, UnitId};
use crate::{Error, Result};

/// The group fitted as the "treated" side of the propensity model.
pub const TREATED_ROLE: Gender = Gender::Female;

/// One unit's covariates in its pre-shock year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub id: UnitId,
    pub group: Gender,
    pub covariates: Vec<f64>,
}

/// Covariates read in year g−1; units missing any of them are left out.
pub fn baseline_rows(ds: &PanelDataset, covariates: &[String]) -> Result<Vec<BaselineRow>> {
    let idx: Vec<usize> = covariates.iter().map(|c| ds.covariate_index(c)).collect::<Result<_>>()?;
    Ok(ds
        .units()
        .iter()
        .filter_map(|u| {
            let x: Option<Vec<f64>> = idx.iter().map(|&j| u.covariate(u.cohort - 1, j)).collect();
            x.map(|covariates| BaselineRow {
                id: u.id.clone(),
                group: u.gender,
                covariates,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub treated: UnitId,
    pub control: UnitId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub mean_male: f64,
    pub mean_female: f64,
    pub std_mean_diff: f64,
    /// Female over male variance; blank for 0/1 covariates.
    pub var_ratio: Option<f64>,
    pub ecdf_mean: f64,
    pub ecdf_max: f64,
    /// Mean absolute within-pair difference over the same scale as the SMD.
    pub std_pair_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub covariates: Vec<String>,
    pub caliper: Option<f64>,
    pub pairs: Vec<MatchedPair>,
    pub n_treated: usize,
    pub n_control: usize,
    pub unmatched_treated: usize,
    pub unmatched_control: usize,
    pub propensity_coefficients: Vec<(String, f64)>,
    pub balance_before: Vec<BalanceRow>,
    pub balance_after: Vec<BalanceRow>,
    pub warnings: Vec<String>,
}

impl MatchResult {
    pub fn matched_ids(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.treated.as_str(), p.control.as_str()])
            .collect()
    }
}

/// Key ordered by propensity, then by unit id rank.
type Key = (u64, usize);

fn key(p: f64, rank: usize) -> Key {
    // p lies in [0, 1], where the IEEE bit pattern orders like the value.
    (p.to_bits(), rank)
}

/// Nearest available control for propensity `p`; equal distances go to the
/// smaller unit id.
fn nearest(pool: &BTreeSet<Key>, p: f64) -> Option<Key> {
    let probe = (p.to_bits(), 0);
    let above = pool.range(probe..).next().copied();
    let below = pool.range(..probe).next_back().map(|&(bits, _)| {
        // Several controls may share this propensity; take the first id.
        *pool.range((bits, 0)..).next().unwrap()
    });
    match (above, below) {
        (None, None) => None,
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (Some(a), Some(b)) => {
            let da = f64::from_bits(a.0) - p;
            let db = p - f64::from_bits(b.0);
            if da < db || (da == db && a.1 < b.1) {
                Some(a)
            } else {
                Some(b)
            }
        }
    }
}

fn is_binary(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == 0.0 || x == 1.0)
}

fn ecdf_stats(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let grid: Vec<f64> = {
        let mut g: Vec<f64> = a.iter().chain(&b).copied().collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    let cdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    let diffs: Vec<f64> = grid.iter().map(|&x| (cdf(&a, x) - cdf(&b, x)).abs()).collect();
    (mean(&diffs), diffs.iter().fold(0.0, |m: f64, &d| m.max(d)))
}

/// Balance of one variable. `scale` standardises both the mean difference
/// and the pair distances.
fn balance_row(
    name: &str,
    male: &[f64],
    female: &[f64],
    scale: f64,
    pair_diffs: Option<&[f64]>,
) -> BalanceRow {
    let (ecdf_mean, ecdf_max) = ecdf_stats(male, female);
    let all_binary = is_binary(male) && is_binary(female);
    BalanceRow {
        covariate: name.to_string(),
        mean_male: mean(male),
        mean_female: mean(female),
        std_mean_diff: (mean(male) - mean(female)) / scale,
        var_ratio: (!all_binary).then(|| sample_variance(female) / sample_variance(male)),
        ecdf_mean,
        ecdf_max,
        std_pair_dist: pair_diffs.map(|d| d.iter().map(|x| x.abs()).sum::<f64>() / d.len() as f64 / scale),
    }
}

fn pooled_scale(male: &[f64], female: &[f64]) -> f64 {
    let s = ((sample_variance(male) + sample_variance(female)) / 2.0).sqrt();
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn balance_table(
    names: &[String],
    columns: &[Vec<f64>],
    male: &[usize],
    female: &[usize],
    scales: &[f64],
    pairs: Option<&[(usize, usize)]>,
) -> Vec<BalanceRow> {
    names
        .iter()
        .zip(columns)
        .zip(scales)
        .map(|((name, col), &scale)| {
            let m: Vec<f64> = male.iter().map(|&i| col[i]).collect();
            let f: Vec<f64> = female.iter().map(|&i| col[i]).collect();
            let d: Option<Vec<f64>> = pairs.map(|ps| ps.iter().map(|&(t, c)| col[t] - col[c]).collect());
            balance_row(name, &m, &f, scale, d.as_deref())
        })
        .collect()
}

/// Greedy 1:1 nearest-neighbour matching without replacement on a logistic
/// propensity of being in [`TREATED_ROLE`]. Treated-role units are visited
/// in descending propensity (ties by id); a match farther than `caliper`
/// leaves the unit unmatched.
///
/// Standardised differences use the pooled pre-match standard deviation in
/// both balance tables, so before and after are on one scale.
pub fn ps_match(rows: &[BaselineRow], covariates: &[String], caliper: Option<f64>) -> Result<MatchResult> {
    if let Some(c) = caliper {
        if !(c >= 0.0) {
            return Err(Error::InvalidInput(format!("caliper must be non-negative, got {c}")));
        }
    }
    if let Some(r) = rows.iter().find(|r| r.covariates.len() != covariates.len()) {
        return Err(Error::InvalidInput(format!("unit {} has {} covariates", r.id, r.covariates.len())));
    }
    let treated: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].group == TREATED_ROLE).collect();
    let controls: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].group != TREATED_ROLE).collect();
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::InvalidInput("matching needs units in both groups".into()));
    }
    let mut rank_order: Vec<usize> = (0..rows.len()).collect();
    rank_order.sort_by(|&a, &b| rows[a].id.cmp(&rows[b].id));
    let mut rank = vec![0; rows.len()];
    for (r, &i) in rank_order.iter().enumerate() {
        rank[i] = r;
    }

    let design = DesignMatrix::with_intercept(
        covariates,
        &rows.iter().map(|r| r.covariates.clone()).collect::<Vec<_>>(),
        (0..rows.len()).collect(),
    )?;
    let y: Vec<f64> = rows.iter().map(|r| (r.group == TREATED_ROLE) as u8 as f64).collect();
    let fit = fit_logistic(&design, &y, LogisticOptions::default())?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("propensity model did not converge ({:?})", fit.warning));
    }
    let p = predict_logistic(&fit, &design);

    let mut pool: BTreeSet<Key> = controls.iter().map(|&i| key(p[i], rank[i])).collect();
    let by_rank: BTreeMap<usize, usize> = controls.iter().map(|&i| (rank[i], i)).collect();
    let mut order = treated.clone();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(rank[a].cmp(&rank[b])));
    let mut pairs = Vec::new();
    for &t in &order {
        let Some(k) = nearest(&pool, p[t]) else {
            break;
        };
        let c = by_rank[&k.1];
        let d = (p[t] - p[c]).abs();
        if caliper.is_some_and(|cal| d > cal) {
            continue;
        }
        pool.remove(&k);
        pairs.push((t, c, d));
    }
    if pairs.is_empty() {
        warnings.push("no treated-role unit found a control within the caliper".into());
    }

    let mut names = vec!["Distance".to_string()];
    names.extend(covariates.iter().cloned());
    let mut columns = vec![p.clone()];
    columns.extend((0..covariates.len()).map(|j| rows.iter().map(|r| r.covariates[j]).collect::<Vec<f64>>()));
    let scales: Vec<f64> = columns
        .iter()
        .map(|col| {
            let m: Vec<f64> = controls.iter().map(|&i| col[i]).collect();
            let f: Vec<f64> = treated.iter().map(|&i| col[i]).collect();
            pooled_scale(&m, &f)
        })
        .collect();
    let before = balance_table(&names, &columns, &controls, &treated, &scales, None);
    let after = if pairs.is_empty() {
        Vec::new()
    } else {
        let mt: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mc: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let tc: Vec<(usize, usize)> = pairs.iter().map(|p| (p.0, p.1)).collect();
        balance_table(&names, &columns, &mc, &mt, &scales, Some(&tc))
    };

    Ok(MatchResult {
        covariates: covariates.to_vec(),
        caliper,
        n_treated: treated.len(),
        n_control: controls.len(),
        unmatched_treated: treated.len() - pairs.len(),
        unmatched_control: controls.len() - pairs.len(),
        pairs: pairs
            .iter()
            .map(|&(t, c, d)| MatchedPair {
                treated: rows[t].id.clone(),
                control: rows[c].id.clone(),
                distance: d,
            })
            .collect(),
        propensity_coefficients: fit.names.iter().cloned().zip(fit.coefficients.iter().copied()).collect(),
        balance_before: before,
        balance_after: after,
        warnings,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Balance rows as CSV, Distance first.
pub fn write_balance_csv<W: Write>(rows: &[BalanceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "",
        "Means Men",
        "Means Women",
        "Std Mean Diff",
        "Var. Ratio",
        "eCDF Mean",
        "eCDF Max",
        "Std. Pair Dist",
    ])?;
    for r in rows {
        w.write_record([
            r.covariate.clone(),
            r.mean_male.to_string(),
            r.mean_female.to_string(),
            r.std_mean_diff.to_string(),
            fmt_opt(r.var_ratio),
            r.ecdf_mean.to_string(),
            r.ecdf_max.to_string(),
            fmt_opt(r.std_pair_dist),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Restricts the panel to matched units and runs the group-time pipeline
/// for each gender.
pub fn matched_gt_did(
    ds: &PanelDataset,
    m: &MatchResult,
    cfg: &GtConfig,
    opts: AggregationOptions,
    spec: &BootstrapSpec,
) -> Result<BTreeMap<Gender, GtTables>> {
    if m.pairs.is_empty() {
        return Err(Error::InvalidInput("matching produced no pairs".into()));
    }
    let keep = m.matched_ids();
    let matched = ds.filter_units(|u| keep.contains(u.id.as_str()));
    let mut out = BTreeMap::new();
    for g in [Gender::Male, Gender::Female] {
        let sub = matched.filter_units(|u| u.gender == g);
        if sub.is_empty() {
            return Err(Error::Estimation(format!("no treated units among matched {g}")));
        }
        let est = gtdid::estimate(&sub, cfg, opts)?;
        out.insert(g, effect_tables(&est, spec)?);
    }
    Ok(out)
}
