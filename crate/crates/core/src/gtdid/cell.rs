use nalgebra::DVector;
use serde::Serialize;

use super::{Estimator, GtConfig};
use crate::numerics::{fit_logistic, fit_ols, predict_logistic, DesignMatrix, FitResult, LogisticOptions};
use crate::panel::{risk_set, PanelDataset, RiskSet, Unidentified, UnitId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFlag {
    /// Covariate propensity model failed (separation or singular design);
    /// intercept-only model used.
    PropensityFallback,
    /// Outcome regression rank deficient among controls; intercept-only used.
    OutcomeModelFallback,
}

/// ATT(g, t) with its per-unit influence contributions.
///
/// `influence` holds `(unit index, ψ_i)` for every unit in the cell sample;
/// the estimator's sampling deviation is `mean(ψ)` over that sample, so
/// `ψ` sums to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTimeCell {
    pub g: i32,
    pub t: i32,
    pub e: i32,
    pub base_year: i32,
    pub att: Option<f64>,
    pub influence: Vec<(usize, f64)>,
    /// Dataset indices of the treated units that entered the cell.
    pub treated: Vec<usize>,
    pub n_treated: usize,
    pub n_control: usize,
    pub n_trimmed: usize,
    pub unidentified: Option<Unidentified>,
    pub flags: Vec<CellFlag>,
}

impl GroupTimeCell {
    fn unidentified(g: i32, t: i32, reason: Unidentified) -> Self {
        GroupTimeCell {
            g,
            t,
            e: t - g,
            base_year: crate::panel::base_year(g, t),
            att: None,
            influence: Vec::new(),
            treated: Vec::new(),
            n_treated: 0,
            n_control: 0,
            n_trimmed: 0,
            unidentified: Some(reason),
            flags: Vec::new(),
        }
    }

    pub fn identified(&self) -> bool {
        self.unidentified.is_none()
    }

    /// Units in the cell sample (treated plus controls).
    pub fn n_sample(&self) -> usize {
        self.influence.len()
    }
}

#[derive(Debug, Clone)]
pub struct NuisanceFits {
    pub propensity: FitResult,
    pub outcome: FitResult,
    pub trimmed: Vec<UnitId>,
}

/// Units of the risk set with both outcome values present (and every listed
/// covariate present in g−1), treated first.
struct Sample {
    units: Vec<usize>,
    n_treated: usize,
    dy: Vec<f64>,
    covariates: Vec<Vec<f64>>,
}

fn sample(ds: &PanelDataset, rs: &RiskSet, y: usize, cov: &[usize]) -> Sample {
    let mut s = Sample {
        units: Vec::new(),
        n_treated: 0,
        dy: Vec::new(),
        covariates: Vec::new(),
    };
    for (side, list) in [(true, &rs.treated), (false, &rs.controls)] {
        for &i in list.iter() {
            let u = &ds.units()[i];
            let (Some(yt), Some(yb)) = (u.outcome(rs.t, y), u.outcome(rs.base_year, y)) else {
                continue;
            };
            let x: Option<Vec<f64>> = cov.iter().map(|&c| u.covariate(rs.g - 1, c)).collect();
            let Some(x) = x else { continue };
            s.units.push(i);
            s.dy.push(yt - yb);
            s.covariates.push(x);
            if side {
                s.n_treated += 1;
            }
        }
    }
    s
}

fn unconditional_from_sample(rs: &RiskSet, s: &Sample) -> GroupTimeCell {
    let (g, t) = (rs.g, rs.t);
    let nt = s.n_treated;
    let nc = s.units.len() - nt;
    if nt == 0 {
        return GroupTimeCell::unidentified(g, t, Unidentified::NoTreated);
    }
    if nc == 0 {
        return GroupTimeCell::unidentified(g, t, Unidentified::NoControls);
    }
    let n = s.units.len() as f64;
    let mt = s.dy[..nt].iter().sum::<f64>() / nt as f64;
    let mc = s.dy[nt..].iter().sum::<f64>() / nc as f64;
    let influence = s
        .units
        .iter()
        .zip(&s.dy)
        .enumerate()
        .map(|(k, (&i, &d))| {
            let psi = if k < nt {
                (d - mt) * n / nt as f64
            } else {
                -(d - mc) * n / nc as f64
            };
            (i, psi)
        })
        .collect();
    GroupTimeCell {
        g,
        t,
        e: t - g,
        base_year: rs.base_year,
        att: Some(mt - mc),
        influence,
        treated: s.units[..nt].to_vec(),
        n_treated: nt,
        n_control: nc,
        n_trimmed: 0,
        unidentified: None,
        flags: Vec::new(),
    }
}

/// Difference of mean outcome changes, treated cohort minus controls.
pub fn att_gt_unconditional(ds: &PanelDataset, cfg: &GtConfig, g: i32, t: i32) -> Result<GroupTimeCell> {
    let y = ds.outcome_index(&cfg.outcome)?;
    let rs = match risk_set(ds, g, t, cfg.window, cfg.strategy) {
        Ok(rs) => rs,
        Err(reason) => return Ok(GroupTimeCell::unidentified(g, t, reason)),
    };
    Ok(unconditional_from_sample(&rs, &sample(ds, &rs, y, &[])))
}

fn design(names: &[String], rows: &[Vec<f64>], cols: &[usize], keys: &[usize]) -> Result<DesignMatrix> {
    let sub: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    DesignMatrix::with_intercept(names, &sub, keys.to_vec())
}

/// Doubly robust ATT(g, t): inverse-odds weighting of outcome-regression
/// residuals. Returns no nuisance fits for unidentified cells.
pub fn att_gt_doubly_robust(
    ds: &PanelDataset,
    cfg: &GtConfig,
    g: i32,
    t: i32,
) -> Result<(GroupTimeCell, Option<NuisanceFits>)> {
    let y = ds.outcome_index(&cfg.outcome)?;
    // Union of both covariate lists; each model picks its columns.
    let mut names: Vec<String> = cfg.ps_covariates.clone();
    for c in &cfg.or_covariates {
        if !names.contains(c) {
            names.push(c.clone());
        }
    }
    let cov: Vec<usize> = names.iter().map(|c| ds.covariate_index(c)).collect::<Result<_>>()?;
    let pick = |list: &[String]| -> Vec<usize> {
        list.iter().map(|c| names.iter().position(|n| n == c).unwrap()).collect()
    };
    let ps_cols = pick(&cfg.ps_covariates);
    let or_cols = pick(&cfg.or_covariates);

    let rs = match risk_set(ds, g, t, cfg.window, cfg.strategy) {
        Ok(rs) => rs,
        Err(reason) => return Ok((GroupTimeCell::unidentified(g, t, reason), None)),
    };
    let s = sample(ds, &rs, y, &cov);
    let nt = s.n_treated;
    let n = s.units.len();
    let nc = n - nt;
    if nt == 0 {
        return Ok((GroupTimeCell::unidentified(g, t, Unidentified::NoTreated), None));
    }
    if nc == 0 {
        return Ok((GroupTimeCell::unidentified(g, t, Unidentified::NoControls), None));
    }
    let mut flags = Vec::new();

    // Propensity of cohort-g membership within the risk set.
    let gvec: Vec<f64> = (0..n).map(|k| if k < nt { 1.0 } else { 0.0 }).collect();
    let ps_x = design(&cfg.ps_covariates, &s.covariates, &ps_cols, &s.units)?;
    let propensity = match fit_logistic(&ps_x, &gvec, LogisticOptions::default()) {
        Ok(fit) if fit.converged => fit,
        Ok(_) | Err(Error::InvalidInput(_)) => {
            flags.push(CellFlag::PropensityFallback);
            let x = DesignMatrix::intercept_only(n, s.units.clone())?;
            fit_logistic(&x, &gvec, LogisticOptions::default())?
        }
        Err(e) => return Err(e),
    };
    let ps_used = if flags.contains(&CellFlag::PropensityFallback) {
        DesignMatrix::intercept_only(n, s.units.clone())?
    } else {
        ps_x
    };
    let p = predict_logistic(&propensity, &ps_used);

    let mut odds = vec![0.0; n];
    let mut trimmed = Vec::new();
    for k in nt..n {
        if p[k] > cfg.trim || p[k] >= 1.0 {
            trimmed.push(ds.units()[s.units[k]].id.clone());
        } else {
            odds[k] = p[k] / (1.0 - p[k]);
        }
    }
    let odds_sum: f64 = odds.iter().sum();
    if !(odds_sum > 0.0) {
        let mut cell = GroupTimeCell::unidentified(g, t, Unidentified::AllControlsTrimmed);
        cell.n_trimmed = trimmed.len();
        return Ok((cell, None));
    }

    // Outcome regression among controls.
    let ctrl_rows: Vec<usize> = (nt..n).collect();
    let or_x = design(&cfg.or_covariates, &s.covariates, &or_cols, &s.units)?;
    let ctrl_x = or_x.select_rows(&ctrl_rows);
    let outcome = match fit_ols(&ctrl_x, &s.dy[nt..], None) {
        Ok(fit) => Some(fit),
        Err(Error::RankDeficient { .. }) | Err(Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };
    let (outcome, or_used) = match outcome {
        Some(fit) => (fit, or_x),
        None => {
            flags.push(CellFlag::OutcomeModelFallback);
            let x = DesignMatrix::intercept_only(nc, s.units[nt..].to_vec())?;
            let fit = fit_ols(&x, &s.dy[nt..], None)?;
            (fit, DesignMatrix::intercept_only(n, s.units.clone())?)
        }
    };
    let m = outcome.linear_predictor(&or_used);

    let nf = n as f64;
    let w1_scale = nf / nt as f64;
    let w0_scale = nf / odds_sum;
    let r: Vec<f64> = s.dy.iter().zip(&m).map(|(d, m)| d - m).collect();
    let att1 = r[..nt].iter().sum::<f64>() * w1_scale / nf;
    let att0 = (nt..n).map(|k| odds[k] * w0_scale * r[k]).sum::<f64>() / nf;

    // Estimation effect of the outcome regression: its linear representation
    // n·(1−D)·r·x'(X_c'X_c)⁻¹ loaded on the treated-minus-weighted-control
    // covariate gap.
    let ox = or_used.values();
    let ko = ox.ncols();
    let mut gap = DVector::zeros(ko);
    for k in 0..n {
        let w = if k < nt { w1_scale } else { 0.0 } - odds[k] * w0_scale;
        gap += ox.row(k).transpose() * (w / nf);
    }
    let xc = ox.rows(nt, nc);
    let or_load = (xc.transpose() * xc).try_inverse().map(|inv| inv * gap * nf);

    // Estimation effect of the propensity score: score n·(D−p)·x' times the
    // inverse information, loaded on the derivative of the control term.
    let px = ps_used.values();
    let mut dcont = DVector::zeros(px.ncols());
    for k in nt..n {
        dcont += px.row(k).transpose() * (odds[k] * w0_scale * (r[k] - att0) / nf);
    }
    let ps_load = propensity.covariance.as_ref().map(|cov| cov * dcont * nf);

    let influence = (0..n)
        .map(|k| {
            let w1 = if k < nt { w1_scale } else { 0.0 };
            let w0 = odds[k] * w0_scale;
            let mut psi = w1 * (r[k] - att1) - w0 * (r[k] - att0);
            if let (Some(l), false) = (&or_load, k < nt) {
                psi -= r[k] * ox.row(k).dot(&l.transpose());
            }
            if let Some(l) = &ps_load {
                psi -= (gvec[k] - p[k]) * px.row(k).dot(&l.transpose());
            }
            (s.units[k], psi)
        })
        .collect();

    let cell = GroupTimeCell {
        g,
        t,
        e: t - g,
        base_year: rs.base_year,
        att: Some(att1 - att0),
        influence,
        treated: s.units[..nt].to_vec(),
        n_treated: nt,
        n_control: nc,
        n_trimmed: trimmed.len(),
        unidentified: None,
        flags,
    };
    Ok((
        cell,
        Some(NuisanceFits {
            propensity,
            outcome,
            trimmed,
        }),
    ))
}

/// Dispatches on [`GtConfig::estimator`].
pub fn att_gt(ds: &PanelDataset, cfg: &GtConfig, g: i32, t: i32) -> Result<(GroupTimeCell, Option<NuisanceFits>)> {
    match cfg.estimator {
        Estimator::Unconditional => att_gt_unconditional(ds, cfg, g, t).map(|c| (c, None)),
        Estimator::DoublyRobust => att_gt_doubly_robust(ds, cfg, g, t),
    }
}
