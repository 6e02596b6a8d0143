use std::collections::{BTreeMap, BTreeSet, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gtdid::{EffectTable, TableKind};
use crate::numerics::{cluster_robust_cov, fit_ols, within_transform, within_transform_columns, DesignMatrix, WithinOptions};
use crate::panel::{Gender, PanelDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventStudySpec {
    pub e_min: i32,
    pub e_max: i32,
    /// Controls for focal cohort g are the units first shocked in g + lag.
    pub lag: i32,
    /// Omitted event time.
    pub base: i32,
    pub level: f64,
}

impl Default for EventStudySpec {
    fn default() -> Self {
        EventStudySpec {
            e_min: -5,
            e_max: 4,
            lag: 5,
            base: -1,
            level: 0.95,
        }
    }
}

impl EventStudySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_min <= self.base && self.base <= self.e_max) {
            return Err(Error::InvalidInput(format!(
                "base period {} outside event window {}..{}",
                self.base, self.e_min, self.e_max
            )));
        }
        if self.e_min == self.e_max {
            return Err(Error::InvalidInput("event window holds only the base period".into()));
        }
        if self.lag <= self.e_max {
            return Err(Error::InvalidInput(format!(
                "control lag {} must exceed the last event time {}",
                self.lag, self.e_max
            )));
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0.5, 1), got {}", self.level)));
        }
        Ok(())
    }

    /// Event times that get a coefficient.
    pub fn event_times(&self) -> Vec<i32> {
        (self.e_min..=self.e_max).filter(|&e| e != self.base).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StackMember {
    /// Index into the dataset's units.
    pub unit: usize,
    /// Actual shock year for treated members, placebo date for controls.
    pub focal: i32,
    pub treated: bool,
}

/// Units assigned to focal cohorts, each unit at most once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stack {
    pub members: Vec<StackMember>,
    pub focal_cohorts: Vec<i32>,
    /// Units that would have served a later comparison but were already taken.
    pub reassignments_skipped: usize,
}

/// Walks focal cohorts in ascending order. Each pairs the cohort with the
/// cohort shocked `lag` years later, dated at the focal year; a unit keeps
/// its first assignment.
pub fn build_stack(ds: &PanelDataset, lag: i32) -> Stack {
    let by_cohort: BTreeMap<i32, Vec<usize>> = ds.units().iter().enumerate().fold(BTreeMap::new(), |mut m, (i, u)| {
        m.entry(u.cohort).or_insert_with(Vec::new).push(i);
        m
    });
    let mut taken = HashSet::new();
    let mut members = Vec::new();
    let mut focal_cohorts = Vec::new();
    let mut skipped = 0;
    for (&g, units) in &by_cohort {
        if !ds.in_span(g) {
            continue;
        }
        let Some(controls) = by_cohort.get(&(g + lag)) else {
            continue;
        };
        let free_t: Vec<usize> = units.iter().copied().filter(|i| !taken.contains(i)).collect();
        let free_c: Vec<usize> = controls.iter().copied().filter(|i| !taken.contains(i)).collect();
        skipped += units.len() - free_t.len();
        if free_t.is_empty() || free_c.is_empty() {
            continue;
        }
        focal_cohorts.push(g);
        for (list, treated) in [(&free_t, true), (&free_c, false)] {
            for &i in list {
                taken.insert(i);
                members.push(StackMember { unit: i, focal: g, treated });
            }
        }
    }
    members.sort_by_key(|m| m.unit);
    Stack {
        members,
        focal_cohorts,
        reassignments_skipped: skipped,
    }
}

struct StackRows {
    y: Vec<f64>,
    member: Vec<usize>,
    event: Vec<i32>,
    year: Vec<i32>,
}

fn stack_rows(ds: &PanelDataset, stack: &Stack, outcome: usize, spec: &EventStudySpec) -> StackRows {
    let mut rows = StackRows {
        y: Vec::new(),
        member: Vec::new(),
        event: Vec::new(),
        year: Vec::new(),
    };
    for (k, m) in stack.members.iter().enumerate() {
        for o in &ds.units()[m.unit].observations {
            let e = o.year - m.focal;
            if e < spec.e_min || e > spec.e_max {
                continue;
            }
            if let Some(v) = o.outcomes[outcome] {
                rows.y.push(v);
                rows.member.push(k);
                rows.event.push(e);
                rows.year.push(o.year);
            }
        }
    }
    rows
}

fn dense_index<T: Ord + Copy>(keys: &[T]) -> Vec<usize> {
    let levels: BTreeMap<T, usize> = keys
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    keys.iter().map(|k| levels[k]).collect()
}

struct FeFit {
    beta: Vec<f64>,
    se: Vec<f64>,
    n_obs: usize,
    n_clusters: usize,
}

/// OLS of `y` on `x` after sweeping out the two fixed-effect dimensions;
/// standard errors clustered on `cluster`.
fn fit_two_way(
    y: &[f64],
    x: DMatrix<f64>,
    names: Vec<String>,
    cluster: &[usize],
    second_fe: &[usize],
) -> Result<FeFit> {
    let opts = WithinOptions::default();
    let yt = within_transform(y, cluster, second_fe, opts);
    let xt = within_transform_columns(&x, cluster, second_fe, opts);
    let dead: Vec<String> = (0..xt.ncols())
        .filter(|&j| {
            let raw = x.column(j).norm();
            raw == 0.0 || xt.column(j).norm() <= 1e-9 * raw
        })
        .map(|j| names[j].clone())
        .collect();
    if !dead.is_empty() {
        return Err(Error::RankDeficient { columns: dead });
    }
    let design = DesignMatrix::new(names, xt.clone(), (0..y.len()).collect())?;
    let fit = fit_ols(&design, &yt, None)?;
    let fitted = fit.linear_predictor(&design);
    let resid: Vec<f64> = yt.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let cov = cluster_robust_cov(&xt, &resid, cluster, xt.ncols())?;
    let n_clusters = cluster.iter().collect::<BTreeSet<_>>().len();
    Ok(FeFit {
        se: (0..cov.nrows()).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        beta: fit.coefficients,
        n_obs: y.len(),
        n_clusters,
    })
}

fn treated_counts(stack: &Stack, rows: &StackRows, e: i32) -> usize {
    rows.event
        .iter()
        .zip(&rows.member)
        .filter(|(&ev, &k)| ev == e && stack.members[k].treated)
        .map(|(_, &k)| k)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Event-study regression on treated×event-time dummies with unit and
/// calendar-year effects absorbed. Controls carry the focal cohort's date.
pub fn twfe_event_study(ds: &PanelDataset, outcome: &str, spec: &EventStudySpec) -> Result<EffectTable> {
    spec.validate()?;
    let oi = ds.outcome_index(outcome)?;
    let stack = build_stack(ds, spec.lag);
    if stack.focal_cohorts.is_empty() {
        return Err(Error::Estimation(format!("no cohort has a comparison cohort {} years later", spec.lag)));
    }
    let rows = stack_rows(ds, &stack, oi, spec);
    let events = spec.event_times();
    let mut x = DMatrix::zeros(rows.y.len(), events.len());
    for r in 0..rows.y.len() {
        if stack.members[rows.member[r]].treated {
            if let Some(j) = events.iter().position(|&e| e == rows.event[r]) {
                x[(r, j)] = 1.0;
            }
        }
    }
    let names = events.iter().map(|e| format!("treated:e={e}")).collect();
    let year_fe = dense_index(&rows.year);
    let fit = fit_two_way(&rows.y, x, names, &rows.member, &year_fe)?;
    let out = events
        .iter()
        .enumerate()
        .map(|(j, &e)| (e.to_string(), fit.beta[j], fit.se[j], treated_counts(&stack, &rows, e)))
        .collect();
    Ok(EffectTable::from_normal(TableKind::Twfe, out, spec.level)
        .with_metadata("base_period", spec.base)
        .with_metadata("control_lag", spec.lag)
        .with_metadata("focal_cohorts", stack.focal_cohorts.len())
        .with_metadata("units", stack.members.len())
        .with_metadata("observations", fit.n_obs)
        .with_metadata("clusters", fit.n_clusters)
        .with_metadata("reassignments_skipped", stack.reassignments_skipped))
}

/// Female-minus-male event-time effects from the pooled regression with
/// treated×event and female×treated×event dummies, unit and gender×year
/// effects. Rows are the female interaction coefficients.
pub fn triple_did(ds: &PanelDataset, outcome: &str, spec: &EventStudySpec) -> Result<EffectTable> {
    spec.validate()?;
    let oi = ds.outcome_index(outcome)?;
    let stack = build_stack(ds, spec.lag);
    for role in [true, false] {
        let genders: BTreeSet<Gender> = stack
            .members
            .iter()
            .filter(|m| m.treated == role)
            .map(|m| ds.units()[m.unit].gender)
            .collect();
        if genders.len() < 2 {
            let which = if role { "treated" } else { "control" };
            return Err(Error::InvalidInput(format!("triple difference needs both genders among {which} units")));
        }
    }
    let rows = stack_rows(ds, &stack, oi, spec);
    let events = spec.event_times();
    let k = events.len();
    let mut x = DMatrix::zeros(rows.y.len(), 2 * k);
    let female: Vec<bool> = rows
        .member
        .iter()
        .map(|&m| ds.units()[stack.members[m].unit].gender == Gender::Female)
        .collect();
    for r in 0..rows.y.len() {
        if stack.members[rows.member[r]].treated {
            if let Some(j) = events.iter().position(|&e| e == rows.event[r]) {
                x[(r, j)] = 1.0;
                if female[r] {
                    x[(r, k + j)] = 1.0;
                }
            }
        }
    }
    let names = events
        .iter()
        .map(|e| format!("treated:e={e}"))
        .chain(events.iter().map(|e| format!("female:treated:e={e}")))
        .collect();
    let gender_year: Vec<(bool, i32)> = female.iter().copied().zip(rows.year.iter().copied()).collect();
    let fe = dense_index(&gender_year);
    let fit = fit_two_way(&rows.y, x, names, &rows.member, &fe)?;
    let out = events
        .iter()
        .enumerate()
        .map(|(j, &e)| (e.to_string(), fit.beta[k + j], fit.se[k + j], treated_counts(&stack, &rows, e)))
        .collect();
    Ok(EffectTable::from_normal(TableKind::TripleDid, out, spec.level)
        .with_metadata("contrast", "female_minus_male")
        .with_metadata("base_period", spec.base)
        .with_metadata("control_lag", spec.lag)
        .with_metadata("focal_cohorts", stack.focal_cohorts.len())
        .with_metadata("units", stack.members.len())
        .with_metadata("observations", fit.n_obs)
        .with_metadata("clusters", fit.n_clusters))
}
