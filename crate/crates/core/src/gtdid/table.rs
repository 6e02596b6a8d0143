use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::AggregateRow;
use crate::inference::{BandResult, BandType};
use crate::numerics::special::{normal_quantile, normal_two_sided_p};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Dynamic,
    Group,
    Overall,
    GroupTime,
    Twfe,
    TripleDid,
}

impl TableKind {
    pub fn label_header(self) -> &'static str {
        match self {
            TableKind::Dynamic | TableKind::Twfe | TableKind::TripleDid => "Event Time",
            TableKind::Group => "Cohort",
            TableKind::Overall => "Aggregate",
            TableKind::GroupTime => "Cell",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub label: String,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub n_unique_treated: usize,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectTable {
    pub kind: TableKind,
    pub band: BandType,
    pub level: f64,
    pub critical_value: f64,
    pub rows: Vec<EffectRow>,
    pub metadata: BTreeMap<String, String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EffectTable {
    /// Joins aggregate rows with a band computed over their non-missing rows
    /// (in order).
    pub fn from_rows(kind: TableKind, rows: &[AggregateRow], band: &BandResult) -> Self {
        let mut k = 0;
        let out = rows
            .iter()
            .map(|r| match r.estimate {
                None => EffectRow {
                    label: r.label.to_string(),
                    estimate: None,
                    se: None,
                    ci_lower: None,
                    ci_upper: None,
                    n_unique_treated: r.n_unique_treated,
                    p_value: None,
                    degenerate: false,
                },
                Some(est) => {
                    let row = EffectRow {
                        label: r.label.to_string(),
                        estimate: Some(est),
                        se: Some(band.se[k]),
                        ci_lower: Some(band.bounds[k].0),
                        ci_upper: Some(band.bounds[k].1),
                        n_unique_treated: r.n_unique_treated,
                        p_value: Some(band.p_values[k]),
                        degenerate: band.degenerate.contains(&k),
                    };
                    k += 1;
                    row
                }
            })
            .collect();
        EffectTable {
            kind,
            band: band.band,
            level: band.level,
            critical_value: band.critical_value,
            rows: out,
            metadata: BTreeMap::new(),
        }
    }

    /// Rows with analytic standard errors and normal critical values.
    pub fn from_normal(kind: TableKind, rows: Vec<(String, f64, f64, usize)>, level: f64) -> Self {
        let z = normal_quantile((1.0 + level) / 2.0);
        let rows = rows
            .into_iter()
            .map(|(label, est, se, n)| EffectRow {
                label,
                estimate: Some(est),
                se: Some(se),
                ci_lower: Some(est - z * se),
                ci_upper: Some(est + z * se),
                n_unique_treated: n,
                p_value: Some(if se > 0.0 { normal_two_sided_p(est / se) } else if est == 0.0 { 1.0 } else { 0.0 }),
                degenerate: !(se > 0.0),
            })
            .collect();
        EffectTable {
            kind,
            band: BandType::Pointwise,
            level,
            critical_value: z,
            rows,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn row(&self, label: &str) -> Option<&EffectRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            self.kind.label_header(),
            "Avg ATT",
            "CI-Lower",
            "CI-Upper",
            "No uniq treated",
            "p-value",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                fmt_opt(r.estimate),
                fmt_opt(r.ci_lower),
                fmt_opt(r.ci_upper),
                r.n_unique_treated.to_string(),
                fmt_opt(r.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
