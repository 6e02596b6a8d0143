use std::collections::BTreeMap;

use staggerdid::gtdid::{self, treated_cohorts, AggregationOptions, GroupTimeCell, GtConfig};
use staggerdid::inference::{effect_tables, GtTables};
use staggerdid::Error;

use super::{tag, write_table};
use crate::config::RunConfig;
use crate::data::{load_panel, subgroup};
use crate::error::CliError;
use crate::output::{stage_seed, OutputDir};

pub fn gt_config(cfg: &RunConfig) -> GtConfig {
    GtConfig {
        window: cfg.window,
        strategy: cfg.control_strategy,
        estimator: cfg.estimator,
        trim: cfg.trim,
        e_min: cfg.e_min,
        e_max: cfg.e_max,
        ..GtConfig::new(&cfg.outcome)
    }
    .with_covariates(&cfg.covariates.iter().map(String::as_str).collect::<Vec<_>>())
}

pub fn aggregation(cfg: &RunConfig) -> AggregationOptions {
    AggregationOptions {
        exclude_year_zero: cfg.exclude_year_zero,
    }
}

pub fn write_tables(out: &mut OutputDir, prefix: &str, t: &GtTables) -> Result<(), CliError> {
    write_table(out, &format!("{prefix}_dynamic"), &t.dynamic)?;
    write_table(out, &format!("{prefix}_group"), &t.group)?;
    write_table(out, &format!("{prefix}_overall"), &t.overall)
}

fn write_cells(out: &mut OutputDir, name: &str, cells: &[GroupTimeCell]) -> Result<(), CliError> {
    out.write_csv(name, |w| {
        w.write_record([
            "g",
            "t",
            "e",
            "base_year",
            "att",
            "n_treated",
            "n_control",
            "n_trimmed",
            "unidentified",
            "flags",
        ])?;
        for c in cells {
            w.write_record([
                c.g.to_string(),
                c.t.to_string(),
                c.e.to_string(),
                c.base_year.to_string(),
                c.att.map(|v| v.to_string()).unwrap_or_default(),
                c.n_treated.to_string(),
                c.n_control.to_string(),
                c.n_trimmed.to_string(),
                c.unidentified.map(|u| tag(&u)).unwrap_or_default(),
                c.flags.iter().map(tag).collect::<Vec<_>>().join(";"),
            ])?;
        }
        Ok(())
    })
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let ds = load_panel(cfg, &mut out)?;
    let gt = gt_config(cfg);
    gt.validate(&ds)?;
    let mut summary = BTreeMap::new();
    for gender in cfg.gender.genders() {
        let sub = subgroup(&ds, gender, cfg)?;
        if treated_cohorts(&sub).is_empty() {
            return Err(Error::Estimation(format!("no treated units in the {gender} sample")).into());
        }
        let est = gtdid::estimate(&sub, &gt, aggregation(cfg))?;
        let spec = cfg.bootstrap_spec(stage_seed(cfg.seed, &format!("bootstrap:{gender}")));
        let tables = effect_tables(&est, &spec)?;
        let prefix = gender.as_str();
        write_tables(&mut out, prefix, &tables)?;
        write_cells(&mut out, &format!("{prefix}_cells.csv"), &est.cells)?;
        summary.insert(gender, cell_counts(sub.len(), &est.cells));
        println!(
            "{gender}: {} units, overall {}",
            sub.len(),
            tables.overall.rows[0].estimate.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
        );
    }
    out.count("samples", summary);
    out.finish("estimate", cfg)
}

pub fn cell_counts(n_units: usize, cells: &[GroupTimeCell]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    m.insert("units", n_units);
    m.insert("cells", cells.len());
    m.insert("cells_unidentified", cells.iter().filter(|c| !c.identified()).count());
    m.insert("cells_with_fallback", cells.iter().filter(|c| !c.flags.is_empty()).count());
    m.insert("controls_trimmed", cells.iter().map(|c| c.n_trimmed).sum());
    m
}
