use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GroupTimeCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallMode {
    /// Cohort-size-weighted mean of the group rows.
    CohortSize,
    /// Equal-weight mean of the post-period dynamic rows.
    EventTimeMean,
}

impl OverallMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OverallMode::CohortSize => "overall_cohort_weighted",
            OverallMode::EventTimeMean => "overall_event_time_mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    Event(i32),
    Cohort(i32),
    Cell { g: i32, t: i32 },
    Overall(OverallMode),
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::Event(e) => write!(f, "{e}"),
            RowLabel::Cohort(g) => write!(f, "{g}"),
            RowLabel::Cell { g, t } => write!(f, "{g}:{t}"),
            RowLabel::Overall(m) => f.write_str(m.as_str()),
        }
    }
}

/// A point estimate with its influence vector on the dataset scale:
/// `φ` has one entry per dataset unit and the estimate's sampling deviation
/// is `mean(φ)`. Missing rows have no estimate and an empty `φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub label: RowLabel,
    pub estimate: Option<f64>,
    pub n_unique_treated: usize,
    #[serde(skip)]
    pub influence: Vec<f64>,
}

impl AggregateRow {
    fn missing(label: RowLabel) -> Self {
        AggregateRow {
            label,
            estimate: None,
            n_unique_treated: 0,
            influence: Vec::new(),
        }
    }
}

/// Adds `weight · N/n_cell · ψ` for each unit of `cell` into `phi`.
fn accumulate(phi: &mut [f64], cell: &GroupTimeCell, weight: f64) {
    let scale = weight * phi.len() as f64 / cell.n_sample() as f64;
    for &(i, psi) in &cell.influence {
        phi[i] += scale * psi;
    }
}

fn combine(label: RowLabel, parts: &[(&GroupTimeCell, f64)], n_units: usize) -> AggregateRow {
    if parts.is_empty() {
        return AggregateRow::missing(label);
    }
    let mut phi = vec![0.0; n_units];
    let mut est = 0.0;
    let mut treated = BTreeSet::new();
    for (cell, w) in parts {
        est += w * cell.att.expect("identified cell");
        accumulate(&mut phi, cell, *w);
        treated.extend(cell.treated.iter().copied());
    }
    AggregateRow {
        label,
        estimate: Some(est),
        n_unique_treated: treated.len(),
        influence: phi,
    }
}

/// One row per identified cell.
pub fn cell_rows(cells: &[GroupTimeCell], n_units: usize) -> Vec<AggregateRow> {
    cells
        .iter()
        .filter(|c| c.identified())
        .map(|c| combine(RowLabel::Cell { g: c.g, t: c.t }, &[(c, 1.0)], n_units))
        .collect()
}

/// θ(e): cells at event time e weighted by their treated counts.
pub fn aggregate_dynamic(cells: &[GroupTimeCell], n_units: usize) -> Vec<AggregateRow> {
    let mut by_e: BTreeMap<i32, Vec<&GroupTimeCell>> = BTreeMap::new();
    for c in cells {
        let list = by_e.entry(c.e).or_default();
        if c.identified() {
            list.push(c);
        }
    }
    by_e.into_iter()
        .map(|(e, list)| {
            let total: usize = list.iter().map(|c| c.n_treated).sum();
            let parts: Vec<(&GroupTimeCell, f64)> =
                list.iter().map(|c| (*c, c.n_treated as f64 / total as f64)).collect();
            combine(RowLabel::Event(e), &parts, n_units)
        })
        .collect()
}

fn first_post(exclude_year_zero: bool) -> i32 {
    if exclude_year_zero {
        1
    } else {
        0
    }
}

/// Per-cohort equal-weight mean over the cohort's post-period cells.
pub fn aggregate_group(cells: &[GroupTimeCell], n_units: usize, exclude_year_zero: bool) -> Vec<AggregateRow> {
    let start = first_post(exclude_year_zero);
    let mut by_g: BTreeMap<i32, Vec<&GroupTimeCell>> = BTreeMap::new();
    for c in cells {
        let list = by_g.entry(c.g).or_default();
        if c.identified() && c.e >= start {
            list.push(c);
        }
    }
    by_g.into_iter()
        .map(|(g, list)| {
            let w = 1.0 / list.len() as f64;
            let parts: Vec<(&GroupTimeCell, f64)> = list.iter().map(|c| (*c, w)).collect();
            combine(RowLabel::Cohort(g), &parts, n_units)
        })
        .collect()
}

pub fn aggregate_overall(
    cells: &[GroupTimeCell],
    n_units: usize,
    mode: OverallMode,
    exclude_year_zero: bool,
) -> AggregateRow {
    let start = first_post(exclude_year_zero);
    let label = RowLabel::Overall(mode);
    // Both modes reduce to per-cell weights.
    let mut weights: Vec<(&GroupTimeCell, f64)> = Vec::new();
    match mode {
        OverallMode::CohortSize => {
            let groups = aggregate_group(cells, n_units, exclude_year_zero);
            let sizes: BTreeMap<i32, usize> = groups
                .iter()
                .filter(|r| r.estimate.is_some())
                .map(|r| match r.label {
                    RowLabel::Cohort(g) => (g, r.n_unique_treated),
                    _ => unreachable!(),
                })
                .collect();
            let total: usize = sizes.values().sum();
            for (&g, &size) in &sizes {
                let post: Vec<&GroupTimeCell> =
                    cells.iter().filter(|c| c.g == g && c.identified() && c.e >= start).collect();
                let wg = size as f64 / total as f64;
                for c in &post {
                    weights.push((c, wg / post.len() as f64));
                }
            }
        }
        OverallMode::EventTimeMean => {
            let events: BTreeSet<i32> = cells.iter().filter(|c| c.identified() && c.e >= start).map(|c| c.e).collect();
            for &e in &events {
                let at_e: Vec<&GroupTimeCell> = cells.iter().filter(|c| c.e == e && c.identified()).collect();
                let total: usize = at_e.iter().map(|c| c.n_treated).sum();
                for c in at_e {
                    weights.push((c, c.n_treated as f64 / total as f64 / events.len() as f64));
                }
            }
        }
    }
    combine(label, &weights, n_units)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(g: i32, e: i32, att: f64, treated: &[usize], controls: &[usize]) -> GroupTimeCell {
        let n = (treated.len() + controls.len()) as f64;
        let mut influence: Vec<(usize, f64)> = treated.iter().map(|&i| (i, n / treated.len() as f64 * 0.5)).collect();
        influence.extend(controls.iter().map(|&i| (i, -0.5 * n / controls.len() as f64)));
        GroupTimeCell {
            g,
            t: g + e,
            e,
            base_year: g - 1,
            att: Some(att),
            influence,
            treated: treated.to_vec(),
            n_treated: treated.len(),
            n_control: controls.len(),
            n_trimmed: 0,
            unidentified: None,
            flags: Vec::new(),
        }
    }

    #[test]
    fn weighted_by_treated_counts() {
        let a: Vec<usize> = (0..100).collect();
        let b: Vec<usize> = (100..400).collect();
        let ctrl: Vec<usize> = (400..500).collect();
        let cells = vec![cell(2001, 1, 2.0, &a, &ctrl), cell(2002, 1, 6.0, &b, &ctrl)];
        let rows = aggregate_dynamic(&cells, 500);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].estimate.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(rows[0].n_unique_treated, 400);
        let mean_phi: f64 = rows[0].influence.iter().sum::<f64>() / 500.0;
        assert!(mean_phi.abs() < 1e-12);
    }

    #[test]
    fn constant_cells_aggregate_to_constant() {
        let mut cells = Vec::new();
        for g in 2001..2004 {
            for e in -2..3 {
                let t: Vec<usize> = ((g - 2001) as usize * 10..(g - 2001) as usize * 10 + 5).collect();
                cells.push(cell(g, e, 3.5, &t, &[40, 41]));
            }
        }
        for r in aggregate_dynamic(&cells, 50).iter().chain(&aggregate_group(&cells, 50, false)) {
            assert!((r.estimate.unwrap() - 3.5).abs() < 1e-12);
        }
        for mode in [OverallMode::CohortSize, OverallMode::EventTimeMean] {
            for ex in [false, true] {
                assert!((aggregate_overall(&cells, 50, mode, ex).estimate.unwrap() - 3.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn year_zero_exclusion_reproduces_reported_aggregate() {
        // Post-period statin rows: women aggregate 240, men 259.
        let women = [151.76, 234.14, 240.36, 243.78, 242.62];
        let men = [185.29, 271.23, 261.61, 254.04, 250.89];
        let t: Vec<usize> = (0..10).collect();
        for (atts, expected) in [(women, 240.225), (men, 259.4425)] {
            let cells: Vec<GroupTimeCell> =
                atts.iter().enumerate().map(|(e, &a)| cell(2005, e as i32, a, &t, &[20])).collect();
            let row = aggregate_overall(&cells, 30, OverallMode::EventTimeMean, true);
            assert!((row.estimate.unwrap() - expected).abs() < 1e-9);
            assert_eq!(row.estimate.unwrap().round(), expected.round());
            let row = aggregate_overall(&cells, 30, OverallMode::EventTimeMean, false);
            assert!((row.estimate.unwrap() - atts.iter().sum::<f64>() / 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_event_rows_are_flagged() {
        let mut c = cell(2001, 2, 1.0, &[0], &[1]);
        c.att = None;
        c.unidentified = Some(crate::panel::Unidentified::NoControls);
        let rows = aggregate_dynamic(&[c], 2);
        assert_eq!(rows[0].estimate, None);
    }
}
