use super::{CohortLaw, CovariateLaws, DgpSpec, EffectProfile, Mortality, OutcomeSpec};

fn trends(list: &[(&str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|(n, b)| (n.to_string(), *b)).collect()
}

fn statins(effect: EffectProfile) -> OutcomeSpec {
    OutcomeSpec {
        name: "statins".into(),
        intercept: 60.0,
        female_shift: -10.0,
        unit_sd: 60.0,
        levels: trends(&[("age", 10.0), ("income", 5.0)]),
        year_slope: 3.0,
        year_sd: 4.0,
        trends: trends(&[("income", 1.5), ("education", 1.0), ("married", 2.0), ("single", -1.5)]),
        noise_sd: 45.0,
        effect,
    }
}

fn gp_visits(effect: EffectProfile) -> OutcomeSpec {
    OutcomeSpec {
        name: "gp_visits".into(),
        intercept: 7.0,
        female_shift: 0.5,
        unit_sd: 3.0,
        levels: trends(&[("age", 0.5)]),
        year_slope: 0.05,
        year_sd: 0.3,
        trends: trends(&[("education", 0.08), ("single", 0.1)]),
        noise_sd: 2.0,
        effect,
    }
}

fn hospital_days(effect: EffectProfile) -> OutcomeSpec {
    OutcomeSpec {
        name: "hospital_days".into(),
        intercept: 2.0,
        female_shift: 0.0,
        unit_sd: 2.0,
        levels: trends(&[("age", 0.3)]),
        year_slope: 0.02,
        year_sd: 0.2,
        trends: trends(&[("income", 0.05), ("married", -0.05)]),
        noise_sd: 2.5,
        effect,
    }
}

fn profile(male: &[f64], female: &[f64]) -> EffectProfile {
    EffectProfile {
        male: male.to_vec(),
        female: female.to_vec(),
        ..EffectProfile::zero()
    }
}

fn statin_profile() -> EffectProfile {
    profile(&[185.0, 271.0, 262.0, 254.0, 251.0], &[152.0, 234.0, 240.0, 244.0, 243.0])
}

fn base(outcomes: Vec<OutcomeSpec>) -> DgpSpec {
    DgpSpec {
        n_units: 4000,
        start_year: 1995,
        end_year: 2018,
        female_share: 0.335,
        covariates: CovariateLaws {
            female_age_shift: 2.0,
            female_log_income_shift: -0.15,
            female_education_shift: -6.0,
            married_male: 0.68,
            married_female: 0.55,
            ..CovariateLaws::default()
        },
        cohort: CohortLaw {
            first: 1996,
            last: 2018,
            base_logit: -2.9,
            loadings: trends(&[("married", 0.3), ("single", -0.3)]),
            female_loading: 0.0,
        },
        outcomes,
        mortality: Some(Mortality {
            male: 0.025,
            female: 0.02,
        }),
        myocardial_male: 0.5898,
        myocardial_female: 0.5005,
        seed: 0,
    }
}

fn paper_shaped() -> DgpSpec {
    base(vec![
        statins(statin_profile()),
        gp_visits(profile(&[7.5, 7.5, 5.1, 4.3, 4.0], &[7.2, 6.4, 4.0, 2.9, 2.2])),
        hospital_days(profile(&[15.0, 2.8, 1.3, 1.1, 0.8], &[14.7, 2.6, 0.8, 0.5, 0.1])),
    ])
}

fn null() -> DgpSpec {
    base(vec![
        statins(EffectProfile::zero()),
        gp_visits(EffectProfile::zero()),
        hospital_days(EffectProfile::zero()),
    ])
}

/// Covariates drive outcome trends strongly; timing is mildly confounded.
fn confounded_outcome() -> DgpSpec {
    let mut s = base(vec![statins(EffectProfile::constant(10.0, 10.0))]);
    s.outcomes[0].trends = trends(&[("income", 4.0), ("education", 3.0), ("married", 6.0), ("single", -4.0)]);
    s.cohort.loadings = trends(&[("married", 0.6), ("single", -0.4)]);
    s
}

/// Strong covariate-driven timing and large gender gaps in baseline
/// covariates.
fn confounded_propensity() -> DgpSpec {
    let mut s = base(vec![statins(EffectProfile::constant(10.0, 10.0))]);
    s.outcomes[0].trends = trends(&[("education", 1.5), ("married", 3.0), ("single", -2.0)]);
    s.cohort.loadings = trends(&[("married", 1.2), ("single", -0.8)]);
    s.covariates.female_age_shift = 4.0;
    s.covariates.female_log_income_shift = -0.4;
    s.covariates.female_education_shift = -15.0;
    s.covariates.married_male = 0.72;
    s.covariates.married_female = 0.40;
    s
}

/// Statin use rises the year before the recorded shock.
fn violated_pretrends() -> DgpSpec {
    let mut s = paper_shaped();
    s.outcomes[0].effect.anticipation = vec![25.0];
    s
}

fn attrition_heavy() -> DgpSpec {
    let mut s = paper_shaped();
    s.mortality = Some(Mortality {
        male: 0.12,
        female: 0.10,
    });
    s
}

/// Effects grow with event time and differ across cohorts; timing is random.
fn heterogeneous_effects() -> DgpSpec {
    let mut effect = profile(&[20.0, 30.0, 40.0, 50.0, 60.0], &[20.0, 30.0, 40.0, 50.0, 60.0]);
    effect.cohort_slope = 0.08;
    let mut s = base(vec![statins(effect)]);
    s.cohort.loadings.clear();
    s
}

pub fn preset_names() -> Vec<&'static str> {
    vec![
        "null",
        "paper-shaped",
        "confounded-outcome",
        "confounded-propensity",
        "violated-pretrends",
        "attrition-heavy",
        "heterogeneous-effects",
    ]
}

pub fn preset(name: &str) -> Option<DgpSpec> {
    Some(match name {
        "null" => null(),
        "paper-shaped" => paper_shaped(),
        "confounded-outcome" => confounded_outcome(),
        "confounded-propensity" => confounded_propensity(),
        "violated-pretrends" => violated_pretrends(),
        "attrition-heavy" => attrition_heavy(),
        "heterogeneous-effects" => heterogeneous_effects(),
        _ => return None,
    })
}

pub fn scenario_library() -> Vec<(&'static str, DgpSpec)> {
    preset_names().into_iter().map(|n| (n, preset(n).expect("listed preset"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for (name, spec) in scenario_library() {
            spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn violated_preset_has_anticipation_only_there() {
        for (name, spec) in scenario_library() {
            let ant = spec.outcomes.iter().any(|o| !o.effect.anticipation.is_empty());
            assert_eq!(ant, name == "violated-pretrends", "{name}");
        }
    }
}
