use std::collections::BTreeMap;

use staggerdid::numerics::{chi_square_homogeneity, mean, paired_t_test, sample_variance};
use staggerdid::panel::{Gender, PanelDataset, Severity, ShockType};

use crate::config::RunConfig;
use crate::data::{load_panel, subgroup};
use crate::error::CliError;
use crate::output::OutputDir;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Share (in percent) of each category by gender, with a homogeneity test
/// across the categories. Categories absent from both genders are dropped.
fn distribution_rows<T: Copy + Ord>(
    samples: &BTreeMap<Gender, PanelDataset>,
    categories: &[(T, &str)],
    of: impl Fn(&staggerdid::panel::UnitRecord) -> Option<T>,
) -> Vec<[String; 4]> {
    let count = |g: Gender, c: T| {
        samples
            .get(&g)
            .map_or(0, |ds| ds.units().iter().filter(|u| of(u) == Some(c)).count()) as f64
    };
    let used: Vec<(T, &str)> = categories
        .iter()
        .copied()
        .filter(|&(c, _)| count(Gender::Male, c) + count(Gender::Female, c) > 0.0)
        .collect();
    let table: Vec<Vec<f64>> = [Gender::Male, Gender::Female]
        .iter()
        .map(|&g| used.iter().map(|&(c, _)| count(g, c)).collect())
        .collect();
    let p = chi_square_homogeneity(&table).ok().map(|r| r.p_value);
    let totals: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let share = |row: usize, k: usize| {
        if totals[row] > 0.0 {
            (100.0 * table[row][k] / totals[row]).to_string()
        } else {
            String::new()
        }
    };
    let mut rows: Vec<[String; 4]> = used
        .iter()
        .enumerate()
        .map(|(k, &(_, name))| [name.to_string(), share(0, k), share(1, k), if k == 0 { opt(p) } else { String::new() }])
        .collect();
    rows.push([
        "N".into(),
        totals[0].to_string(),
        totals[1].to_string(),
        String::new(),
    ]);
    rows
}

/// Per-unit mean of `outcome` over event times in `range`.
fn unit_window_mean(u: &staggerdid::panel::UnitRecord, idx: usize, lo: i32, hi: i32) -> Option<f64> {
    let vals: Vec<f64> = (lo..=hi).filter_map(|e| u.outcome(u.cohort + e, idx)).collect();
    (!vals.is_empty()).then(|| mean(&vals))
}

pub fn diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let ds = load_panel(cfg, &mut out)?;
    let mut samples = BTreeMap::new();
    for g in [Gender::Male, Gender::Female] {
        samples.insert(g, subgroup(&ds, g, cfg)?);
    }

    let mut shock = distribution_rows(
        &samples,
        &[(ShockType::Myocardial, "Heart attack"), (ShockType::Cerebral, "Stroke")],
        |u| Some(u.shock_type),
    );
    let severity = distribution_rows(
        &samples,
        &[(Severity::Stemi, "STEMI"), (Severity::Nstemi, "NSTEMI")],
        |u| u.severity,
    );
    if severity.len() > 1 {
        shock.extend(severity);
    }
    out.write_csv("shock_distribution.csv", |w| {
        w.write_record(["", "Men", "Women", "p-value"])?;
        for r in &shock {
            w.write_record(r)?;
        }
        Ok(())
    })?;

    let w = cfg.window;
    let outcomes: Vec<(usize, String)> = ds
        .schema()
        .outcomes
        .iter()
        .enumerate()
        .filter(|(_, n)| Some(n.as_str()) != ds.schema().death_outcome.as_deref())
        .map(|(i, n)| (i, n.clone()))
        .collect();
    out.write_csv("pre_post.csv", |wr| {
        wr.write_record(["outcome", "gender", "n", "pre_mean", "post_mean", "difference", "t", "p-value"])?;
        for (idx, name) in &outcomes {
            for (g, sub) in &samples {
                let (pre, post): (Vec<f64>, Vec<f64>) = sub
                    .units()
                    .iter()
                    .filter_map(|u| Some((unit_window_mean(u, *idx, -w, -1)?, unit_window_mean(u, *idx, 0, w - 1)?)))
                    .unzip();
                let test = paired_t_test(&pre, &post).ok();
                wr.write_record([
                    name.clone(),
                    g.as_str().to_string(),
                    pre.len().to_string(),
                    opt((!pre.is_empty()).then(|| mean(&pre))),
                    opt((!post.is_empty()).then(|| mean(&post))),
                    opt(test.as_ref().map(|t| t.mean_difference)),
                    opt(test.as_ref().map(|t| t.t)),
                    opt(test.as_ref().map(|t| t.p_value)),
                ])?;
            }
        }
        Ok(())
    })?;

    // Residuals from calendar-year means over the analysed sample, averaged
    // by event time.
    out.write_csv("detrended.csv", |wr| {
        wr.write_record(["outcome", "gender", "event_time", "mean", "se", "n"])?;
        for (idx, name) in &outcomes {
            let mut by_year: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
            for sub in samples.values() {
                for u in sub.units() {
                    for o in &u.observations {
                        if let Some(v) = o.outcomes[*idx] {
                            let e = by_year.entry(o.year).or_insert((0.0, 0.0));
                            e.0 += v;
                            e.1 += 1.0;
                        }
                    }
                }
            }
            for (g, sub) in &samples {
                let mut by_event: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
                for u in sub.units() {
                    for o in &u.observations {
                        let e = o.year - u.cohort;
                        if e < -w || e > w - 1 {
                            continue;
                        }
                        if let Some(v) = o.outcomes[*idx] {
                            let (s, n) = by_year[&o.year];
                            by_event.entry(e).or_default().push(v - s / n);
                        }
                    }
                }
                for (e, r) in &by_event {
                    let se = (r.len() > 1).then(|| (sample_variance(r) / r.len() as f64).sqrt());
                    wr.write_record([
                        name.clone(),
                        g.as_str().to_string(),
                        e.to_string(),
                        mean(r).to_string(),
                        opt(se),
                        r.len().to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })?;
    out.finish("diagnose", cfg)
}
