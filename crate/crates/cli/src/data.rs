use std::collections::HashSet;

use staggerdid::eligibility::{apply_exclusions, read_profiles_csv};
use staggerdid::numerics::quantile_sorted;
use staggerdid::panel::{
    balanced_subset, deflate, ingest_reader, read_cpi_csv, ColumnMapping, Gender, PanelDataset,
};

use crate::config::{Household, IncomeHalf, RunConfig, DEFAULT_COVARIATES};
use crate::error::CliError;
use crate::output::{sha256_hex, OutputDir};

const ROLE_COLUMNS: [&str; 7] = ["unit_id", "year", "cohort", "gender", "shock_type", "severity", "alive"];

/// Column roles read off the header: the standard identifier columns, known
/// covariates plus any configured ones, `death` as the death outcome, and
/// every other column as an outcome.
fn infer_mapping(header: &csv::StringRecord, cfg: &RunConfig) -> ColumnMapping {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let present = |n: &str| names.contains(&n);
    let covariate_names: HashSet<&str> = DEFAULT_COVARIATES
        .iter()
        .copied()
        .chain(cfg.covariates.iter().map(String::as_str))
        .collect();
    let covariates: Vec<String> = names
        .iter()
        .filter(|n| covariate_names.contains(*n))
        .map(|s| s.to_string())
        .collect();
    let outcomes: Vec<String> = names
        .iter()
        .filter(|n| !ROLE_COLUMNS.contains(n) && !covariate_names.contains(*n))
        .map(|s| s.to_string())
        .collect();
    let opt = |n: &str| present(n).then(|| n.to_string());
    ColumnMapping {
        unit: "unit_id".into(),
        year: "year".into(),
        cohort: "cohort".into(),
        gender: "gender".into(),
        shock_type: opt("shock_type"),
        severity: opt("severity"),
        alive: opt("alive"),
        death_outcome: present("death").then(|| "death".to_string()),
        outcomes,
        covariates,
        delimiter: ',',
    }
}

/// Reads the input panel and applies deflation, eligibility exclusions and
/// the balanced-panel restriction, recording counts as it goes.
pub fn load_panel(cfg: &RunConfig, out: &mut OutputDir) -> Result<PanelDataset, CliError> {
    let path = cfg.input_path()?;
    let bytes = std::fs::read(path).map_err(|e| CliError::config("input", format!("{}: {e}", path.display())))?;
    out.input_sha256 = Some(sha256_hex(&bytes));
    let mapping = match &cfg.columns {
        Some(m) => m.clone(),
        None => {
            let mut rdr = csv::Reader::from_reader(bytes.as_slice());
            infer_mapping(rdr.headers()?, cfg)
        }
    };
    let ingested = ingest_reader(bytes.as_slice(), &mapping)?;
    if !ingested.rejected.is_empty() {
        let first = &ingested.rejected[0];
        eprintln!(
            "warning: {} rows rejected (first: line {}, column {}: {})",
            ingested.rejected.len(),
            first.line,
            first.column,
            first.message
        );
    }
    out.count("rejected_rows", ingested.rejected.len());
    let mut ds = ingested.dataset;
    out.count("units_ingested", ds.len());

    if let (Some(cpi), Some(base)) = (&cfg.cpi, cfg.base_year) {
        let table = read_cpi_csv(cpi)?;
        ds = deflate(&ds, &cfg.outcome, &table, base)?;
    }
    if let Some(p) = &cfg.profiles {
        let profiles = read_profiles_csv(p)?;
        let report = apply_exclusions(&ds, &profiles);
        let counts: std::collections::BTreeMap<&str, usize> =
            report.counts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.count("exclusions", counts);
        ds = report.dataset;
    }
    if cfg.balanced.enabled {
        let before = ds.len();
        ds = balanced_subset(&ds, cfg.balanced.pre, cfg.balanced.post)?;
        out.count("dropped_unbalanced", before - ds.len());
    }
    out.count("units_analysed", ds.len());
    Ok(ds)
}

fn baseline_value(ds: &PanelDataset, name: &str, field: &str) -> Result<Vec<Option<f64>>, CliError> {
    let j = ds
        .covariate_index(name)
        .map_err(|_| CliError::config(field, format!("filter needs a `{name}` covariate column")))?;
    Ok(ds.units().iter().map(|u| u.covariate(u.cohort - 1, j)).collect())
}

/// One gender's sample under the configured subgroup filters. The income
/// split uses the median baseline income of that gender.
pub fn subgroup(ds: &PanelDataset, gender: Gender, cfg: &RunConfig) -> Result<PanelDataset, CliError> {
    let f = &cfg.filters;
    let mut sub = ds.filter_units(|u| {
        u.gender == gender
            && f.shock_type.is_none_or(|s| u.shock_type == s)
            && f.severity.is_none_or(|s| u.severity == Some(s))
    });
    if let Some(h) = f.household {
        let single = baseline_value(&sub, "single", "filters.household")?;
        let keep: HashSet<String> = sub
            .units()
            .iter()
            .zip(&single)
            .filter(|(_, s)| match (h, s) {
                (Household::Single, Some(v)) => *v == 1.0,
                (Household::NonSingle, Some(v)) => *v == 0.0,
                (_, None) => false,
            })
            .map(|(u, _)| u.id.clone())
            .collect();
        sub = sub.filter_units(|u| keep.contains(&u.id));
    }
    if let Some(half) = f.income {
        let income = baseline_value(&sub, "income", "filters.income")?;
        let mut values: Vec<f64> = income.iter().flatten().copied().collect();
        values.sort_by(f64::total_cmp);
        if !values.is_empty() {
            let median = quantile_sorted(&values, 0.5);
            let keep: HashSet<String> = sub
                .units()
                .iter()
                .zip(&income)
                .filter(|(_, v)| match (half, v) {
                    (IncomeHalf::Low, Some(x)) => *x <= median,
                    (IncomeHalf::High, Some(x)) => *x > median,
                    (_, None) => false,
                })
                .map(|(u, _)| u.id.clone())
                .collect();
            sub = sub.filter_units(|u| keep.contains(&u.id));
        }
    }
    Ok(sub)
}
