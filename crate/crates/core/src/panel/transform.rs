use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PanelDataset, UnitRecord};
use crate::{Error, Result};

/// Rescales outcome `outcome` to `base_year` prices: `v · cpi[base] / cpi[year]`.
pub fn deflate(
    ds: &PanelDataset,
    outcome: &str,
    cpi: &BTreeMap<i32, f64>,
    base_year: i32,
) -> Result<PanelDataset> {
    let idx = ds.outcome_index(outcome)?;
    let base = *cpi.get(&base_year).ok_or(Error::MissingCpi(base_year))?;
    if !(base > 0.0) {
        return Err(Error::InvalidInput(format!("CPI for base year {base_year} must be positive")));
    }
    let mut units = ds.units().to_vec();
    for unit in &mut units {
        for obs in &mut unit.observations {
            let index = *cpi.get(&obs.year).ok_or(Error::MissingCpi(obs.year))?;
            if !(index > 0.0) {
                return Err(Error::InvalidInput(format!("CPI for {} must be positive", obs.year)));
            }
            if let Some(v) = obs.outcomes[idx].as_mut() {
                *v *= base / index;
            }
        }
    }
    ds.with_units(units)
}

/// Units alive and observed at every event time `-pre ..= post - 1`
/// (the shock year counts as the first post period).
pub fn balanced_subset(ds: &PanelDataset, pre: u32, post: u32) -> Result<PanelDataset> {
    if pre == 0 || post == 0 {
        return Err(Error::InvalidInput("balanced_subset needs pre >= 1 and post >= 1".into()));
    }
    let (pre, post) = (pre as i32, post as i32);
    Ok(ds.filter_units(|u| {
        (-pre..post).all(|e| matches!(u.observation(u.cohort + e), Some(o) if o.alive))
    }))
}

/// Baseline year of the (g, t) comparison: `g - 1` for post periods and the
/// preceding year for pre-period short differences.
pub fn base_year(g: i32, t: i32) -> i32 {
    if t >= g {
        g - 1
    } else {
        t - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlStrategy {
    /// Cohorts not yet treated at `t` and treated no later than `g + window`.
    NotYetTreatedWindow,
    /// Only the cohort treated exactly `window` years after `g`.
    ShiftedExact,
}

impl std::str::FromStr for ControlStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "not_yet_treated_window" | "not_yet_treated" | "nyt" => Ok(ControlStrategy::NotYetTreatedWindow),
            "shifted_exact" | "shifted" => Ok(ControlStrategy::ShiftedExact),
            other => Err(Error::InvalidInput(format!("unknown control strategy `{other}`"))),
        }
    }
}

/// Why a group-time cell could not be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unidentified {
    OutOfSpan,
    NoTreated,
    NoControls,
    AllControlsTrimmed,
}

/// Unit indices (into [`PanelDataset::units`]) on each side of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSet {
    pub g: i32,
    pub t: i32,
    pub base_year: i32,
    pub treated: Vec<usize>,
    pub controls: Vec<usize>,
}

fn observed_for(unit: &UnitRecord, g: i32, t: i32, base: i32) -> bool {
    unit.observation(t).is_some() && unit.observation(base).is_some() && unit.observation(g - 1).is_some()
}

pub fn risk_set(
    ds: &PanelDataset,
    g: i32,
    t: i32,
    window: i32,
    strategy: ControlStrategy,
) -> Result<RiskSet, Unidentified> {
    let base = base_year(g, t);
    if window < 1 || !ds.in_span(t) || !ds.in_span(base) || !ds.in_span(g - 1) {
        return Err(Unidentified::OutOfSpan);
    }
    let is_control = |c: i32| match strategy {
        ControlStrategy::NotYetTreatedWindow => c > t && c != g && c <= g + window,
        ControlStrategy::ShiftedExact => c == g + window && c > t,
    };
    let mut treated = Vec::new();
    let mut controls = Vec::new();
    for (i, u) in ds.units().iter().enumerate() {
        if u.cohort == g {
            if observed_for(u, g, t, base) {
                treated.push(i);
            }
        } else if is_control(u.cohort) && observed_for(u, g, t, base) {
            controls.push(i);
        }
    }
    if treated.is_empty() {
        return Err(Unidentified::NoTreated);
    }
    if controls.is_empty() {
        return Err(Unidentified::NoControls);
    }
    Ok(RiskSet {
        g,
        t,
        base_year: base,
        treated,
        controls,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::panel::test_support::*;
    use crate::panel::Gender;

    fn full_unit(id: &str, cohort: i32, lo: i32, hi: i32) -> UnitRecord {
        let years: Vec<(i32, f64)> = (lo..=hi).map(|y| (y, y as f64)).collect();
        unit(id, Gender::Female, cohort, &years)
    }

    fn staggered(lo: i32, hi: i32) -> PanelDataset {
        dataset(
            (lo + 1..=hi)
                .map(|c| full_unit(&format!("u{c}"), c, lo, hi))
                .collect(),
        )
    }

    fn control_cohorts(ds: &PanelDataset, rs: &RiskSet) -> BTreeSet<i32> {
        rs.controls.iter().map(|&i| ds.units()[i].cohort).collect()
    }

    #[test]
    fn rolling_window_two_years_after() {
        let ds = staggered(1995, 2018);
        let rs = risk_set(&ds, 2005, 2007, 5, ControlStrategy::NotYetTreatedWindow).unwrap();
        assert_eq!(control_cohorts(&ds, &rs), BTreeSet::from([2008, 2009, 2010]));
        assert_eq!(rs.base_year, 2004);
    }

    #[test]
    fn pre_period_controls_exclude_own_cohort() {
        let ds = staggered(1995, 2018);
        let rs = risk_set(&ds, 2005, 2004, 5, ControlStrategy::NotYetTreatedWindow).unwrap();
        // c > 2004, c != 2005, c <= 2010
        assert_eq!(control_cohorts(&ds, &rs), BTreeSet::from([2006, 2007, 2008, 2009, 2010]));
        assert_eq!(rs.base_year, 2003);
    }

    #[test]
    fn late_cohort_has_no_controls() {
        let ds = staggered(1995, 2018);
        let err = risk_set(&ds, 2015, 2018, 5, ControlStrategy::NotYetTreatedWindow).unwrap_err();
        assert_eq!(err, Unidentified::NoControls);
    }

    #[test]
    fn shifted_exact_uses_single_cohort() {
        let ds = staggered(1995, 2018);
        let rs = risk_set(&ds, 2000, 2002, 5, ControlStrategy::ShiftedExact).unwrap();
        assert_eq!(control_cohorts(&ds, &rs), BTreeSet::from([2005]));
    }

    #[test]
    fn deflate_examples() {
        let ds = dataset(vec![unit("a", Gender::Male, 2016, &[(2014, 100.0), (2015, 100.0)])]);
        let cpi = BTreeMap::from([(2014, 110.0), (2015, 100.0)]);
        let out = deflate(&ds, "y", &cpi, 2015).unwrap();
        let u = &out.units()[0];
        assert_eq!(u.outcome(2015, 0), Some(100.0));
        assert!((u.outcome(2014, 0).unwrap() - 90.909_090_909_090_9).abs() < 1e-9);

        let missing = BTreeMap::from([(2015, 100.0)]);
        assert!(matches!(deflate(&ds, "y", &missing, 2015), Err(Error::MissingCpi(2014))));
    }

    #[test]
    fn balanced_keeps_and_drops() {
        let kept = full_unit("k", 2005, 2000, 2009);
        let mut dead = full_unit("d", 2005, 2000, 2009);
        for o in dead.observations.iter_mut().filter(|o| o.year >= 2007) {
            o.alive = false;
            o.outcomes[0] = None;
        }
        let ds = dataset(vec![kept, dead]);
        let out = balanced_subset(&ds, 5, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.units()[0].id, "k");
    }
}
