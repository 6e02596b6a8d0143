//! Synthetic staggered-adoption panels with known effects.
//!
//! Untreated outcomes follow `Y(0) = α_i + λ_t + Σ_k β_k·z_k(X_i)·(t − start) + ε`,
//! with `z_k` a covariate standardised by its generating law. Trend covariates
//! should be time-invariant traits: age at g−1 is tied to the shock year
//! itself, so an age-driven trend confounds timing in a way no linear model
//! of baseline age recovers. The shock year
//! is drawn from a discrete-time logistic hazard, conditioned on a shock
//! occurring inside the span, so that hazard loadings on covariates move the
//! design from random timing to confounded timing.

mod presets;
mod truth;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use presets::{preset, preset_names, scenario_library};
pub use truth::{CellTruth, OutcomeTruth, TruthRecord};

use crate::eligibility::RiskProfile;
use crate::panel::{Gender, Observation, PanelDataset, PanelSchema, Provenance, Severity, ShockType, UnitRecord};
use crate::{Error, Result};

pub const COVARIATES: [&str; 5] = ["age", "income", "education", "married", "single"];

/// Post-shock effect path for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectProfile {
    /// τ(e) for e = 0, 1, …; the last value holds for later event times.
    pub male: Vec<f64>,
    pub female: Vec<f64>,
    /// Effects scale by `1 + cohort_slope·(g − reference_cohort)`.
    #[serde(default)]
    pub cohort_slope: f64,
    #[serde(default = "default_reference_cohort")]
    pub reference_cohort: i32,
    /// Effects at e = −k, …, −1 (both genders), violating no-anticipation.
    #[serde(default)]
    pub anticipation: Vec<f64>,
}

fn default_reference_cohort() -> i32 {
    2006
}

impl EffectProfile {
    pub fn zero() -> Self {
        EffectProfile::constant(0.0, 0.0)
    }

    pub fn constant(male: f64, female: f64) -> Self {
        EffectProfile {
            male: vec![male],
            female: vec![female],
            cohort_slope: 0.0,
            reference_cohort: default_reference_cohort(),
            anticipation: Vec::new(),
        }
    }

    pub fn tau(&self, gender: Gender, g: i32, e: i32) -> f64 {
        if e < 0 {
            let k = self.anticipation.len() as i32;
            if -e > k {
                return 0.0;
            }
            return self.anticipation[(k + e) as usize];
        }
        let path = match gender {
            Gender::Male => &self.male,
            Gender::Female => &self.female,
        };
        let base = path.get(e as usize).or(path.last()).copied().unwrap_or(0.0);
        base * (1.0 + self.cohort_slope * (g - self.reference_cohort) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub name: String,
    pub intercept: f64,
    pub female_shift: f64,
    /// Sd of the unit effect α_i.
    pub unit_sd: f64,
    /// Covariate level effects (cancel in differences).
    #[serde(default)]
    pub levels: Vec<(String, f64)>,
    pub year_slope: f64,
    pub year_sd: f64,
    /// Per-year trend slope on each standardised covariate.
    #[serde(default)]
    pub trends: Vec<(String, f64)>,
    pub noise_sd: f64,
    pub effect: EffectProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateLaws {
    pub age_min: f64,
    pub age_max: f64,
    /// Added to women's age at shock, then clipped to the range.
    pub female_age_shift: f64,
    pub log_income_mean: f64,
    pub log_income_sd: f64,
    pub female_log_income_shift: f64,
    /// Education in months.
    pub education_mean: f64,
    pub education_sd: f64,
    pub female_education_shift: f64,
    pub married_male: f64,
    pub married_female: f64,
    /// P(single household | not married).
    pub single_if_unmarried: f64,
}

impl Default for CovariateLaws {
    fn default() -> Self {
        CovariateLaws {
            age_min: 50.0,
            age_max: 70.0,
            female_age_shift: 0.0,
            log_income_mean: 12.4,
            log_income_sd: 0.5,
            female_log_income_shift: 0.0,
            education_mean: 140.0,
            education_sd: 30.0,
            female_education_shift: 0.0,
            married_male: 0.6,
            married_female: 0.6,
            single_if_unmarried: 0.8,
        }
    }
}

impl CovariateLaws {
    /// Population (centre, scale) used to standardise a covariate.
    pub fn standardiser(&self, name: &str) -> Result<(f64, f64)> {
        match name {
            "age" => {
                let c = (self.age_min + self.age_max) / 2.0;
                Ok((c, ((self.age_max - self.age_min) / 12f64.sqrt()).max(1e-9)))
            }
            "income" => {
                let s2 = self.log_income_sd * self.log_income_sd;
                let m = (self.log_income_mean + s2 / 2.0).exp();
                Ok((m, m * (s2.exp() - 1.0).sqrt()))
            }
            "education" => Ok((self.education_mean, self.education_sd.max(1e-9))),
            "married" | "single" => Ok((0.0, 1.0)),
            other => Err(Error::InvalidInput(format!("unknown simulated covariate `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortLaw {
    pub first: i32,
    pub last: i32,
    /// Logit of the annual shock hazard at z = 0.
    pub base_logit: f64,
    /// Hazard loadings on standardised covariates.
    #[serde(default)]
    pub loadings: Vec<(String, f64)>,
    #[serde(default)]
    pub female_loading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mortality {
    /// Annual death probability from the year after the shock.
    pub male: f64,
    pub female: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n_units: usize,
    pub start_year: i32,
    pub end_year: i32,
    pub female_share: f64,
    pub covariates: CovariateLaws,
    pub cohort: CohortLaw,
    pub outcomes: Vec<OutcomeSpec>,
    pub mortality: Option<Mortality>,
    /// P(myocardial shock) by gender.
    pub myocardial_male: f64,
    pub myocardial_female: f64,
    pub seed: u64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_units == 0 {
            return bad("n_units must be positive".into());
        }
        if self.start_year >= self.end_year {
            return bad("year span must cover at least two years".into());
        }
        if self.cohort.first <= self.start_year || self.cohort.last < self.cohort.first {
            return bad("cohort years must start after the first panel year".into());
        }
        if !(0.0..=1.0).contains(&self.female_share) {
            return bad("female_share must lie in [0, 1]".into());
        }
        for p in [self.myocardial_male, self.myocardial_female, self.covariates.married_male, self.covariates.married_female, self.covariates.single_if_unmarried] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if let Some(m) = self.mortality {
            if !(0.0..1.0).contains(&m.male) || !(0.0..1.0).contains(&m.female) {
                return bad("death probabilities must lie in [0, 1)".into());
            }
        }
        if !self.cohort.base_logit.is_finite() {
            return bad("hazard base logit must be finite".into());
        }
        for (name, _) in &self.cohort.loadings {
            self.covariates.standardiser(name)?;
        }
        let mut names = std::collections::HashSet::new();
        for o in &self.outcomes {
            if o.name == "death" || !names.insert(o.name.as_str()) {
                return bad(format!("outcome name `{}` is reserved or repeated", o.name));
            }
            for (name, _) in o.trends.iter().chain(&o.levels) {
                self.covariates.standardiser(name)?;
            }
            if o.noise_sd < 0.0 || o.unit_sd < 0.0 || o.year_sd < 0.0 {
                return bad(format!("outcome `{}` has a negative sd", o.name));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> PanelSchema {
        let mut outcomes: Vec<String> = self.outcomes.iter().map(|o| o.name.clone()).collect();
        let death = self.mortality.map(|_| {
            outcomes.push("death".to_string());
            "death".to_string()
        });
        PanelSchema::new(outcomes, COVARIATES.iter().map(|s| s.to_string()).collect(), death)
    }

    /// Conditional cohort distribution for a unit with standardised
    /// covariates `z` (indexed like [`COVARIATES`]).
    pub fn cohort_probabilities(&self, z: &[f64; 5], female: bool) -> Vec<f64> {
        let mut eta = self.cohort.base_logit + if female { self.cohort.female_loading } else { 0.0 };
        for (name, l) in &self.cohort.loadings {
            let k = COVARIATES.iter().position(|c| c == name).expect("validated covariate");
            eta += l * z[k];
        }
        let h = sigmoid(eta);
        let years = (self.cohort.last - self.cohort.first + 1) as usize;
        let mut w: Vec<f64> = (0..years).map(|k| h * (1.0 - h).powi(k as i32)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }
}

/// Per-unit draws needed beyond the panel itself.
#[derive(Debug, Clone)]
struct UnitDraw {
    age_at_shock: f64,
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite non-negative sd")
}

/// Generates a panel and its ground truth.
pub fn simulate(spec: &DgpSpec) -> Result<(PanelDataset, TruthRecord)> {
    let (ds, _) = simulate_inner(spec)?;
    let truth = TruthRecord::build(spec, &ds)?;
    Ok((ds, truth))
}

fn simulate_inner(spec: &DgpSpec) -> Result<(PanelDataset, Vec<UnitDraw>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let laws = &spec.covariates;
    let years: Vec<i32> = (spec.start_year..=spec.end_year).collect();
    let std_normal = normal(0.0, 1.0);

    let year_effects: Vec<Vec<f64>> = spec
        .outcomes
        .iter()
        .map(|o| {
            years
                .iter()
                .map(|&t| o.year_slope * (t - spec.start_year) as f64 + o.year_sd * std_normal.sample(&mut rng))
                .collect()
        })
        .collect();
    let standardisers: Vec<(f64, f64)> = COVARIATES.iter().map(|c| laws.standardiser(c)).collect::<Result<_>>()?;
    let resolve = |list: &[(String, f64)]| -> Vec<(usize, f64)> {
        list.iter()
            .map(|(n, b)| (COVARIATES.iter().position(|c| c == n).expect("validated"), *b))
            .collect()
    };
    let trends: Vec<Vec<(usize, f64)>> = spec.outcomes.iter().map(|o| resolve(&o.trends)).collect();
    let levels: Vec<Vec<(usize, f64)>> = spec.outcomes.iter().map(|o| resolve(&o.levels)).collect();

    let mut units = Vec::with_capacity(spec.n_units);
    let mut draws = Vec::with_capacity(spec.n_units);
    for i in 0..spec.n_units {
        let female = rng.random::<f64>() < spec.female_share;
        let gender = if female { Gender::Female } else { Gender::Male };
        let fshift = |s: f64| if female { s } else { 0.0 };

        let age_at_shock = (rng.random_range(laws.age_min..=laws.age_max) + fshift(laws.female_age_shift))
            .clamp(laws.age_min, laws.age_max);
        let income = (normal(laws.log_income_mean + fshift(laws.female_log_income_shift), laws.log_income_sd)
            .sample(&mut rng))
        .exp();
        let education = normal(laws.education_mean + fshift(laws.female_education_shift), laws.education_sd)
            .sample(&mut rng)
            .max(0.0);
        let p_married = if female { laws.married_female } else { laws.married_male };
        let married = rng.random::<f64>() < p_married;
        let single = !married && rng.random::<f64>() < laws.single_if_unmarried;
        let raw = [age_at_shock, income, education, married as u8 as f64, single as u8 as f64];
        let mut z = [0.0; 5];
        for k in 0..5 {
            z[k] = (raw[k] - standardisers[k].0) / standardisers[k].1;
        }

        let probs = spec.cohort_probabilities(&z, female);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = probs.len() - 1;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = j;
                break;
            }
        }
        let g = spec.cohort.first + k as i32;

        let myocardial = rng.random::<f64>() < if female { spec.myocardial_female } else { spec.myocardial_male };
        let shock_type = if myocardial { ShockType::Myocardial } else { ShockType::Cerebral };
        let severity = if myocardial {
            Some(if rng.random::<bool>() { Severity::Stemi } else { Severity::Nstemi })
        } else {
            None
        };

        let alpha: Vec<f64> = spec
            .outcomes
            .iter()
            .zip(&levels)
            .map(|(o, lv)| {
                o.intercept + fshift(o.female_shift) + lv.iter().map(|&(k, b)| b * z[k]).sum::<f64>()
                    + o.unit_sd * std_normal.sample(&mut rng)
            })
            .collect();

        let mut death_year = None;
        if let Some(m) = spec.mortality {
            let p = if female { m.female } else { m.male };
            for y in g + 1..=spec.end_year {
                if rng.random::<f64>() < p {
                    death_year = Some(y);
                    break;
                }
            }
        }

        let observations = years
            .iter()
            .enumerate()
            .map(|(yi, &t)| {
                let alive = death_year.is_none_or(|d| t < d);
                let mut outcomes: Vec<Option<f64>> = spec
                    .outcomes
                    .iter()
                    .enumerate()
                    .map(|(oi, o)| {
                        // Draw noise for every year so later draws do not
                        // depend on the death year.
                        let eps = o.noise_sd * std_normal.sample(&mut rng);
                        if !alive {
                            return None;
                        }
                        let trend: f64 = trends[oi].iter().map(|&(k, b)| b * z[k]).sum::<f64>() * (t - spec.start_year) as f64;
                        let effect = o.effect.tau(gender, g, t - g);
                        Some(alpha[oi] + year_effects[oi][yi] + trend + eps + effect)
                    })
                    .collect();
                if spec.mortality.is_some() {
                    outcomes.push(Some(if alive { 0.0 } else { 1.0 }));
                }
                let age = age_at_shock - (g - t) as f64;
                Observation {
                    year: t,
                    outcomes,
                    covariates: vec![Some(age), Some(income), Some(education), Some(raw[3]), Some(raw[4])],
                    alive,
                }
            })
            .collect();

        units.push(UnitRecord {
            id: format!("u{i:06}"),
            gender,
            cohort: g,
            shock_type,
            severity,
            observations,
        });
        draws.push(UnitDraw { age_at_shock });
    }

    let cohorts: std::collections::BTreeSet<i32> = units.iter().map(|u| u.cohort).collect();
    if cohorts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "every unit is shocked in {}; no not-yet-treated controls exist",
            cohorts.iter().next().copied().unwrap_or(spec.cohort.first)
        )));
    }
    let ds = PanelDataset::new(units, spec.schema(), Provenance::Simulated)?;
    Ok((ds, draws))
}

/// Risk profiles consistent with a simulated panel: baseline age is one year
/// below age at shock and comorbidities are drawn independently.
pub fn simulate_profiles(spec: &DgpSpec, seed: u64) -> Result<BTreeMap<String, RiskProfile>> {
    let (ds, draws) = simulate_inner(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for (u, d) in ds.units().iter().zip(&draws) {
        let mut flag = |p: f64| rng.random::<f64>() < p;
        let profile = RiskProfile {
            congestive_heart_failure: flag(0.05),
            hypertension: flag(0.25),
            age: d.age_at_shock - 1.0,
            diabetes: flag(0.1),
            prior_stroke_tia_te: flag(0.03),
            vascular_disease: flag(0.05),
            sex: u.gender,
        };
        out.insert(u.id.clone(), profile);
    }
    Ok(out)
}
