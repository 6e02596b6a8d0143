//! Analytical-sample construction: CHA₂DS₂-VASc scoring and the score, age and
//! early-death exclusions.
//!
//! Age bands: over 75 scores 2 points, 65 through 75 scores 1. Age exactly 75
//! sits in the lower band; the source criteria name "> 75" and "65–74" and
//! leave 75 itself unassigned.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::panel::{Gender, PanelDataset};
use crate::{Error, Result};

/// Risk factors evaluated in the year before the shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub congestive_heart_failure: bool,
    pub hypertension: bool,
    /// Age in years at the baseline year (the year before the shock).
    pub age: f64,
    pub diabetes: bool,
    pub prior_stroke_tia_te: bool,
    pub vascular_disease: bool,
    pub sex: Gender,
}

pub fn chads_vasc_score(p: &RiskProfile) -> u32 {
    let age_points = if p.age > 75.0 {
        2
    } else if p.age >= 65.0 {
        1
    } else {
        0
    };
    u32::from(p.congestive_heart_failure)
        + u32::from(p.hypertension)
        + age_points
        + u32::from(p.diabetes)
        + 2 * u32::from(p.prior_stroke_tia_te)
        + u32::from(p.vascular_disease)
        + u32::from(p.sex == Gender::Female)
}

/// Highest score a unit may carry and remain in the sample.
pub fn max_allowed_score(sex: Gender) -> u32 {
    match sex {
        Gender::Male => 1,
        Gender::Female => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    MissingProfile,
    RiskScore,
    Age,
    EarlyDeath,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::MissingProfile => "missing_profile",
            ExclusionReason::RiskScore => "risk_score",
            ExclusionReason::Age => "age",
            ExclusionReason::EarlyDeath => "early_death",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExclusionReport {
    pub dataset: PanelDataset,
    /// First failing criterion per excluded unit, checked in the order
    /// profile, score, age, early death.
    pub excluded: BTreeMap<String, ExclusionReason>,
    pub counts: BTreeMap<ExclusionReason, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EligibilityRules {
    pub min_age_at_shock: f64,
    pub max_age_at_shock: f64,
}

impl Default for EligibilityRules {
    fn default() -> Self {
        EligibilityRules {
            min_age_at_shock: 50.0,
            max_age_at_shock: 70.0,
        }
    }
}

pub fn apply_exclusions(
    ds: &PanelDataset,
    profiles: &HashMap<String, RiskProfile>,
) -> ExclusionReport {
    apply_exclusions_with(ds, profiles, EligibilityRules::default())
}

pub fn apply_exclusions_with(
    ds: &PanelDataset,
    profiles: &HashMap<String, RiskProfile>,
    rules: EligibilityRules,
) -> ExclusionReport {
    let death_idx = ds.death_index();
    let mut excluded = BTreeMap::new();
    for unit in ds.units() {
        let reason = match profiles.get(&unit.id) {
            None => Some(ExclusionReason::MissingProfile),
            Some(p) => {
                // Age attained in the shock year.
                let age_at_shock = p.age + 1.0;
                let dies_in_shock_year = unit.observation(unit.cohort).is_some_and(|o| {
                    !o.alive || death_idx.and_then(|d| o.outcomes[d]) == Some(1.0)
                }) || unit.death_year().is_some_and(|d| d <= unit.cohort);
                if chads_vasc_score(p) > max_allowed_score(unit.gender) {
                    Some(ExclusionReason::RiskScore)
                } else if age_at_shock < rules.min_age_at_shock || age_at_shock > rules.max_age_at_shock {
                    Some(ExclusionReason::Age)
                } else if dies_in_shock_year {
                    Some(ExclusionReason::EarlyDeath)
                } else {
                    None
                }
            }
        };
        if let Some(r) = reason {
            excluded.insert(unit.id.clone(), r);
        }
    }
    let mut counts = BTreeMap::new();
    for r in excluded.values() {
        *counts.entry(*r).or_insert(0) += 1;
    }
    let dataset = ds.filter_units(|u| !excluded.contains_key(&u.id));
    ExclusionReport {
        dataset,
        excluded,
        counts,
    }
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    unit_id: String,
    congestive_heart_failure: String,
    hypertension: String,
    age: f64,
    diabetes: String,
    prior_stroke_tia_te: String,
    vascular_disease: String,
    sex: String,
}

fn flag(s: &str, field: &str, unit: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(Error::InvalidInput(format!("profile {unit}: `{other}` is not a boolean for {field}"))),
    }
}

/// Reads profiles keyed by `unit_id` with one boolean column per component.
pub fn read_profiles_reader<R: Read>(reader: R) -> Result<HashMap<String, RiskProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = HashMap::new();
    for row in rdr.deserialize::<ProfileRow>() {
        let r = row?;
        if !(r.age >= 0.0) {
            return Err(Error::InvalidInput(format!("profile {}: negative age", r.unit_id)));
        }
        let p = RiskProfile {
            congestive_heart_failure: flag(&r.congestive_heart_failure, "congestive_heart_failure", &r.unit_id)?,
            hypertension: flag(&r.hypertension, "hypertension", &r.unit_id)?,
            age: r.age,
            diabetes: flag(&r.diabetes, "diabetes", &r.unit_id)?,
            prior_stroke_tia_te: flag(&r.prior_stroke_tia_te, "prior_stroke_tia_te", &r.unit_id)?,
            vascular_disease: flag(&r.vascular_disease, "vascular_disease", &r.unit_id)?,
            sex: r.sex.parse()?,
        };
        out.insert(r.unit_id, p);
    }
    Ok(out)
}

pub fn read_profiles_csv(path: &Path) -> Result<HashMap<String, RiskProfile>> {
    read_profiles_reader(std::fs::File::open(path)?)
}

pub fn write_profiles_csv(profiles: &BTreeMap<String, RiskProfile>, path: &Path) -> Result<()> {
    write_profiles_writer(profiles, std::fs::File::create(path)?)
}

pub fn write_profiles_writer<W: Write>(profiles: &BTreeMap<String, RiskProfile>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "unit_id",
        "congestive_heart_failure",
        "hypertension",
        "age",
        "diabetes",
        "prior_stroke_tia_te",
        "vascular_disease",
        "sex",
    ])?;
    let b = |v: bool| if v { "1" } else { "0" };
    for (id, p) in profiles {
        w.write_record([
            id.as_str(),
            b(p.congestive_heart_failure),
            b(p.hypertension),
            &p.age.to_string(),
            b(p.diabetes),
            b(p.prior_stroke_tia_te),
            b(p.vascular_disease),
            p.sex.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
