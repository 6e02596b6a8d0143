use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DgpSpec, EffectProfile};
use crate::gtdid::GroupTimeCell;
use crate::panel::{Gender, PanelDataset};
use crate::{Error, Result};

/// Realised ATT among the cohort-g units of one gender alive in year t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    pub gender: Gender,
    pub g: i32,
    pub t: i32,
    pub att: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTruth {
    pub name: String,
    pub effect: EffectProfile,
    /// τ(e) at the reference cohort: (gender, e, τ).
    pub population: Vec<(Gender, i32, f64)>,
    pub cells: Vec<CellTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub seed: u64,
    pub outcomes: Vec<OutcomeTruth>,
}

impl TruthRecord {
    pub(super) fn build(spec: &DgpSpec, ds: &PanelDataset) -> Result<Self> {
        let mut outcomes = Vec::new();
        for o in &spec.outcomes {
            let idx = ds.outcome_index(&o.name)?;
            let lead = o.effect.anticipation.len() as i32;
            let horizon = o.effect.male.len().max(o.effect.female.len()) as i32;
            let mut population = Vec::new();
            for gender in [Gender::Male, Gender::Female] {
                for e in -lead.max(4)..=horizon.max(4) {
                    population.push((gender, e, o.effect.tau(gender, o.effect.reference_cohort, e)));
                }
            }
            let mut acc: BTreeMap<(Gender, i32, i32), (f64, usize)> = BTreeMap::new();
            for u in ds.units() {
                for obs in &u.observations {
                    if obs.year < u.cohort - lead || obs.outcomes[idx].is_none() {
                        continue;
                    }
                    let entry = acc.entry((u.gender, u.cohort, obs.year)).or_insert((0.0, 0));
                    entry.0 += o.effect.tau(u.gender, u.cohort, obs.year - u.cohort);
                    entry.1 += 1;
                }
            }
            let cells = acc
                .into_iter()
                .map(|((gender, g, t), (sum, n))| CellTruth {
                    gender,
                    g,
                    t,
                    att: sum / n as f64,
                    n,
                })
                .collect();
            outcomes.push(OutcomeTruth {
                name: o.name.clone(),
                effect: o.effect.clone(),
                population,
                cells,
            });
        }
        Ok(TruthRecord {
            seed: spec.seed,
            outcomes,
        })
    }

    pub fn outcome(&self, name: &str) -> Result<&OutcomeTruth> {
        self.outcomes
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("no truth recorded for outcome `{name}`")))
    }

    /// What a cell's DiD contrast targets: the mean over its treated units of
    /// `τ(t − g) − τ(base − g)`. Equals ATT(g, t) without anticipation.
    pub fn cell_estimand(&self, ds: &PanelDataset, outcome: &str, cell: &GroupTimeCell) -> Result<Option<f64>> {
        let effect = &self.outcome(outcome)?.effect;
        if !cell.identified() || cell.treated.is_empty() {
            return Ok(None);
        }
        let sum: f64 = cell
            .treated
            .iter()
            .map(|&i| {
                let u = &ds.units()[i];
                effect.tau(u.gender, cell.g, cell.t - cell.g) - effect.tau(u.gender, cell.g, cell.base_year - cell.g)
            })
            .sum();
        Ok(Some(sum / cell.treated.len() as f64))
    }

    /// True θ(e) under the estimator's own cell weights (treated counts of
    /// identified cells).
    pub fn dynamic_truth(
        &self,
        ds: &PanelDataset,
        outcome: &str,
        cells: &[GroupTimeCell],
    ) -> Result<BTreeMap<i32, f64>> {
        let mut acc: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
        for c in cells {
            if let Some(v) = self.cell_estimand(ds, outcome, c)? {
                let e = acc.entry(c.e).or_insert((0.0, 0.0));
                e.0 += v * c.n_treated as f64;
                e.1 += c.n_treated as f64;
            }
        }
        Ok(acc.into_iter().map(|(e, (s, w))| (e, s / w)).collect())
    }
}
