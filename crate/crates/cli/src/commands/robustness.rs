use std::collections::BTreeMap;

use serde::Serialize;
use staggerdid::alt::{baseline_rows, matched_gt_did, ps_match, triple_did, twfe_event_study, write_balance_csv, EventStudySpec};
use staggerdid::gtdid::EffectTable;
use staggerdid::panel::{Gender, PanelDataset};

use super::estimate::{aggregation, gt_config, write_tables};
use super::write_table;
use crate::config::RunConfig;
use crate::data::{load_panel, subgroup};
use crate::error::CliError;
use crate::output::{stage_seed, OutputDir};

fn event_spec(cfg: &RunConfig) -> EventStudySpec {
    EventStudySpec {
        e_min: cfg.event_study.e_min,
        e_max: cfg.event_study.e_max,
        lag: cfg.event_study.lag.unwrap_or(cfg.window),
        base: cfg.event_study.base,
        level: cfg.bootstrap.level,
    }
}

/// Both genders' samples under the subgroup filters, pooled.
fn filtered_pool(ds: &PanelDataset, cfg: &RunConfig) -> Result<PanelDataset, CliError> {
    let mut units = Vec::new();
    for g in [Gender::Male, Gender::Female] {
        units.extend(subgroup(ds, g, cfg)?.units().iter().cloned());
    }
    units.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ds.with_units(units)?)
}

fn print_table(t: &EffectTable) -> Result<(), CliError> {
    print!("{}", t.to_csv_string()?);
    Ok(())
}

pub fn twfe(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let ds = load_panel(cfg, &mut out)?;
    let spec = event_spec(cfg);
    for gender in cfg.gender.genders() {
        let sub = subgroup(&ds, gender, cfg)?;
        let table = twfe_event_study(&sub, &cfg.outcome, &spec)?;
        println!("# {gender}");
        print_table(&table)?;
        write_table(&mut out, &format!("{}_twfe", gender.as_str()), &table)?;
    }
    out.finish("twfe", cfg)
}

pub fn tripledid(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let ds = load_panel(cfg, &mut out)?;
    let pooled = filtered_pool(&ds, cfg)?;
    let table = triple_did(&pooled, &cfg.outcome, &event_spec(cfg))?;
    print_table(&table)?;
    write_table(&mut out, "tripledid", &table)?;
    out.finish("tripledid", cfg)
}

#[derive(Serialize)]
struct MatchSummary<'a> {
    treated_role: Gender,
    covariates: &'a [String],
    caliper: Option<f64>,
    n_treated: usize,
    n_control: usize,
    pairs: usize,
    unmatched_treated: usize,
    unmatched_control: usize,
    propensity_coefficients: &'a [(String, f64)],
    warnings: &'a [String],
}

pub fn match_genders(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let ds = load_panel(cfg, &mut out)?;
    let pooled = filtered_pool(&ds, cfg)?;
    let rows = baseline_rows(&pooled, &cfg.covariates)?;
    out.count("baseline_rows", rows.len());
    let m = ps_match(&rows, &cfg.covariates, cfg.matching.caliper)?;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    for (name, table) in [("balance_before.csv", &m.balance_before), ("balance_after.csv", &m.balance_after)] {
        let mut buf = Vec::new();
        write_balance_csv(table, &mut buf)?;
        out.write(name, &buf)?;
    }
    out.write_csv("pairs.csv", |w| {
        w.write_record(["treated", "control", "distance"])?;
        for p in &m.pairs {
            w.write_record([p.treated.as_str(), p.control.as_str(), &p.distance.to_string()])?;
        }
        Ok(())
    })?;
    out.write_json(
        "match.json",
        &MatchSummary {
            treated_role: staggerdid::alt::TREATED_ROLE,
            covariates: &m.covariates,
            caliper: m.caliper,
            n_treated: m.n_treated,
            n_control: m.n_control,
            pairs: m.pairs.len(),
            unmatched_treated: m.unmatched_treated,
            unmatched_control: m.unmatched_control,
            propensity_coefficients: &m.propensity_coefficients,
            warnings: &m.warnings,
        },
    )?;
    let smd = |t: &[staggerdid::alt::BalanceRow]| t.iter().map(|r| r.std_mean_diff.abs()).fold(0.0, f64::max);
    println!(
        "{} pairs; max |SMD| {:.3} before, {:.3} after",
        m.pairs.len(),
        smd(&m.balance_before),
        smd(&m.balance_after)
    );
    if cfg.matching.estimate {
        let spec = cfg.bootstrap_spec(stage_seed(cfg.seed, "bootstrap:matched"));
        let tables = matched_gt_did(&pooled, &m, &gt_config(cfg), aggregation(cfg), &spec)?;
        let mut counts = BTreeMap::new();
        for (g, t) in &tables {
            write_tables(&mut out, &format!("matched_{}", g.as_str()), t)?;
            counts.insert(g.as_str(), t.dynamic.metadata.get("n_units").cloned().unwrap_or_default());
        }
        out.count("matched_samples", counts);
    }
    out.finish("match", cfg)
}
