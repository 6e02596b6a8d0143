//! Panel data model: one record per unit, each holding a year-ordered list of
//! observations. Outcomes and covariates are stored positionally against the
//! dataset schema; a missing value is `None`, never zero.

mod io;
mod transform;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{
    ingest_csv, ingest_reader, read_cpi_csv, read_cpi_reader, write_csv, write_writer, ColumnMapping,
    Ingested, RowError,
};
pub use transform::{
    balanced_subset, base_year, deflate, risk_set, ControlStrategy, RiskSet, Unidentified,
};

pub type UnitId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn other(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "man" | "men" => Ok(Gender::Male),
            "female" | "f" | "woman" | "women" => Ok(Gender::Female),
            other => Err(Error::InvalidInput(format!("unknown gender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockType {
    Myocardial,
    Cerebral,
}

impl ShockType {
    pub fn as_str(self) -> &'static str {
        match self {
            ShockType::Myocardial => "myocardial",
            ShockType::Cerebral => "cerebral",
        }
    }
}

impl FromStr for ShockType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "myocardial" | "ami" | "heart" => Ok(ShockType::Myocardial),
            "cerebral" | "stroke" => Ok(ShockType::Cerebral),
            other => Err(Error::InvalidInput(format!("unknown shock type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Stemi,
    Nstemi,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Stemi => "STEMI",
            Severity::Nstemi => "NSTEMI",
        }
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STEMI" => Ok(Severity::Stemi),
            "NSTEMI" => Ok(Severity::Nstemi),
            other => Err(Error::InvalidInput(format!("unknown severity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ingested,
    Simulated,
}

/// One unit-year. `outcomes` and `covariates` are aligned with
/// [`PanelSchema::outcomes`] and [`PanelSchema::covariates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub year: i32,
    pub outcomes: Vec<Option<f64>>,
    pub covariates: Vec<Option<f64>>,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: UnitId,
    pub gender: Gender,
    /// Year of the first health shock.
    pub cohort: i32,
    pub shock_type: ShockType,
    pub severity: Option<Severity>,
    /// Strictly increasing in `year`.
    pub observations: Vec<Observation>,
}

impl UnitRecord {
    pub fn observation(&self, year: i32) -> Option<&Observation> {
        self.observations
            .binary_search_by_key(&year, |o| o.year)
            .ok()
            .map(|i| &self.observations[i])
    }

    /// Treatment indicator for calendar year `t`.
    pub fn treated_at(&self, t: i32) -> bool {
        t >= self.cohort
    }

    pub fn event_time(&self, t: i32) -> i32 {
        t - self.cohort
    }

    pub fn outcome(&self, year: i32, idx: usize) -> Option<f64> {
        self.observation(year).and_then(|o| o.outcomes[idx])
    }

    pub fn covariate(&self, year: i32, idx: usize) -> Option<f64> {
        self.observation(year).and_then(|o| o.covariates[idx])
    }

    /// Calendar year of death, if the unit has a non-alive observation.
    pub fn death_year(&self) -> Option<i32> {
        self.observations.iter().find(|o| !o.alive).map(|o| o.year)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub outcomes: Vec<String>,
    pub covariates: Vec<String>,
    /// Name of the absorbing 0/1 death outcome, if the dataset carries one.
    pub death_outcome: Option<String>,
}

impl PanelSchema {
    pub fn new(outcomes: Vec<String>, covariates: Vec<String>, death_outcome: Option<String>) -> Self {
        PanelSchema {
            outcomes,
            covariates,
            death_outcome,
        }
    }
}

/// Immutable, validated panel. Transforms return new datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    units: Vec<UnitRecord>,
    schema: PanelSchema,
    span: Option<(i32, i32)>,
    provenance: Provenance,
}

impl PanelDataset {
    pub fn new(units: Vec<UnitRecord>, schema: PanelSchema, provenance: Provenance) -> Result<Self> {
        validate_schema(&schema)?;
        let death_idx = match &schema.death_outcome {
            Some(name) => Some(position(&schema.outcomes, name).ok_or_else(|| {
                Error::Schema(format!("death outcome `{name}` is not an outcome column"))
            })?),
            None => None,
        };

        let mut seen_ids = HashSet::with_capacity(units.len());
        let mut dup_ids = Vec::new();
        let mut dup_years = Vec::new();
        let mut span: Option<(i32, i32)> = None;
        for unit in &units {
            if !seen_ids.insert(unit.id.as_str()) {
                dup_ids.push((unit.id.clone(), unit.cohort));
            }
            let mut prev: Option<i32> = None;
            for obs in &unit.observations {
                if obs.outcomes.len() != schema.outcomes.len()
                    || obs.covariates.len() != schema.covariates.len()
                {
                    return Err(Error::Schema(format!(
                        "unit {} year {}: value count does not match schema",
                        unit.id, obs.year
                    )));
                }
                match prev {
                    Some(p) if p == obs.year => dup_years.push((unit.id.clone(), obs.year)),
                    Some(p) if p > obs.year => {
                        return Err(Error::Integrity {
                            message: "observations are not ordered by year".into(),
                            keys: vec![(unit.id.clone(), obs.year)],
                        })
                    }
                    _ => {}
                }
                prev = Some(obs.year);
                span = Some(match span {
                    None => (obs.year, obs.year),
                    Some((lo, hi)) => (lo.min(obs.year), hi.max(obs.year)),
                });
            }
            check_death_rules(unit, death_idx)?;
        }
        if !dup_ids.is_empty() {
            return Err(Error::Integrity {
                message: "duplicate unit ids".into(),
                keys: dup_ids,
            });
        }
        if !dup_years.is_empty() {
            return Err(Error::Integrity {
                message: "duplicate (unit, year) pairs".into(),
                keys: dup_years,
            });
        }
        Ok(PanelDataset {
            units,
            schema,
            span,
            provenance,
        })
    }

    /// New dataset with the same schema and provenance over a subset of units.
    pub fn with_units(&self, units: Vec<UnitRecord>) -> Result<Self> {
        PanelDataset::new(units, self.schema.clone(), self.provenance)
    }

    /// Keeps units for which `keep` returns true.
    pub fn filter_units<F: FnMut(&UnitRecord) -> bool>(&self, mut keep: F) -> Self {
        let units: Vec<UnitRecord> = self.units.iter().filter(|u| keep(u)).cloned().collect();
        let span = span_of(&units);
        PanelDataset {
            units,
            schema: self.schema.clone(),
            span,
            provenance: self.provenance,
        }
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn schema(&self) -> &PanelSchema {
        &self.schema
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// First and last calendar year with any observation.
    pub fn span(&self) -> Option<(i32, i32)> {
        self.span
    }

    pub fn in_span(&self, year: i32) -> bool {
        matches!(self.span, Some((lo, hi)) if year >= lo && year <= hi)
    }

    pub fn outcome_index(&self, name: &str) -> Result<usize> {
        position(&self.schema.outcomes, name)
            .ok_or_else(|| Error::Schema(format!("unknown outcome `{name}`")))
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        position(&self.schema.covariates, name)
            .ok_or_else(|| Error::Schema(format!("unknown covariate `{name}`")))
    }

    pub fn death_index(&self) -> Option<usize> {
        self.schema
            .death_outcome
            .as_deref()
            .and_then(|n| position(&self.schema.outcomes, n))
    }

    /// Sorted distinct cohort years.
    pub fn cohorts(&self) -> Vec<i32> {
        self.units
            .iter()
            .map(|u| u.cohort)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn cohort_sizes(&self) -> BTreeMap<i32, usize> {
        let mut sizes = BTreeMap::new();
        for u in &self.units {
            *sizes.entry(u.cohort).or_insert(0) += 1;
        }
        sizes
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    pub fn genders(&self) -> BTreeSet<Gender> {
        self.units.iter().map(|u| u.gender).collect()
    }

    pub fn n_observations(&self) -> usize {
        self.units.iter().map(|u| u.observations.len()).sum()
    }
}

fn position(names: &[String], name: &str) -> Option<usize> {
    names.iter().position(|n| n == name)
}

fn span_of(units: &[UnitRecord]) -> Option<(i32, i32)> {
    units
        .iter()
        .flat_map(|u| u.observations.iter().map(|o| o.year))
        .fold(None, |acc, y| match acc {
            None => Some((y, y)),
            Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
        })
}

fn validate_schema(schema: &PanelSchema) -> Result<()> {
    let mut seen = HashSet::new();
    for name in schema.outcomes.iter().chain(&schema.covariates) {
        if !seen.insert(name.as_str()) {
            return Err(Error::Schema(format!("column `{name}` appears twice in schema")));
        }
    }
    Ok(())
}

fn check_death_rules(unit: &UnitRecord, death_idx: Option<usize>) -> Result<()> {
    let mut dead = false;
    for obs in &unit.observations {
        if let Some(d) = death_idx {
            if let Some(v) = obs.outcomes[d] {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Integrity {
                        message: format!("death indicator must be 0/1, got {v}"),
                        keys: vec![(unit.id.clone(), obs.year)],
                    });
                }
                if dead && v == 0.0 {
                    return Err(Error::Integrity {
                        message: "death indicator reverts to 0 after death".into(),
                        keys: vec![(unit.id.clone(), obs.year)],
                    });
                }
                if v == 1.0 {
                    dead = true;
                }
            }
        }
        if !obs.alive {
            dead = true;
        } else if dead {
            return Err(Error::Integrity {
                message: "unit is alive after death".into(),
                keys: vec![(unit.id.clone(), obs.year)],
            });
        }
        if !obs.alive {
            let leaked = obs
                .outcomes
                .iter()
                .enumerate()
                .any(|(i, v)| Some(i) != death_idx && v.is_some());
            if leaked {
                return Err(Error::Integrity {
                    message: "non-death outcome present after death".into(),
                    keys: vec![(unit.id.clone(), obs.year)],
                });
            }
        }
    }
    Ok(())
}
