use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Gender, Observation, PanelDataset, PanelSchema, Provenance, Severity, ShockType, UnitRecord,
};
use crate::{Error, Result};

/// Maps dataset roles onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub unit: String,
    pub year: String,
    pub cohort: String,
    pub gender: String,
    #[serde(default)]
    pub shock_type: Option<String>,
    #[serde(default)]
    pub severity: Option<String>,
    #[serde(default)]
    pub alive: Option<String>,
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub death_outcome: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl ColumnMapping {
    /// The layout written by [`write_csv`] for a dataset with this schema.
    pub fn for_schema(schema: &PanelSchema) -> Self {
        ColumnMapping {
            unit: "unit_id".into(),
            year: "year".into(),
            cohort: "cohort".into(),
            gender: "gender".into(),
            shock_type: Some("shock_type".into()),
            severity: Some("severity".into()),
            alive: Some("alive".into()),
            outcomes: schema.outcomes.clone(),
            covariates: schema.covariates.clone(),
            death_outcome: schema.death_outcome.clone(),
            delimiter: ',',
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        if self.delimiter.is_ascii() {
            Ok(self.delimiter as u8)
        } else {
            Err(Error::Schema(format!("delimiter `{}` is not ASCII", self.delimiter)))
        }
    }
}

/// A rejected CSV row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub column: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: PanelDataset,
    pub rejected: Vec<RowError>,
}

struct Columns {
    unit: usize,
    year: usize,
    cohort: usize,
    gender: usize,
    shock_type: Option<usize>,
    severity: Option<usize>,
    alive: Option<usize>,
    outcomes: Vec<usize>,
    covariates: Vec<usize>,
}

fn resolve(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Columns> {
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let mut missing = Vec::new();
    let mut find = |name: &str| -> usize {
        match index.get(name) {
            Some(&i) => i,
            None => {
                missing.push(name.to_string());
                usize::MAX
            }
        }
    };
    let cols = Columns {
        unit: find(&mapping.unit),
        year: find(&mapping.year),
        cohort: find(&mapping.cohort),
        gender: find(&mapping.gender),
        shock_type: mapping.shock_type.as_deref().map(&mut find),
        severity: mapping.severity.as_deref().map(&mut find),
        alive: mapping.alive.as_deref().map(&mut find),
        outcomes: mapping.outcomes.iter().map(|n| find(n)).collect(),
        covariates: mapping.covariates.iter().map(|n| find(n)).collect(),
    };
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    Ok(cols)
}

struct UnitAttrs {
    gender: Gender,
    cohort: i32,
    shock_type: ShockType,
    severity: Option<Severity>,
    first_line: u64,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

fn parse_opt_f64(s: &str) -> std::result::Result<Option<f64>, String> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

/// Reads a long-format panel from any reader.
pub fn ingest_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter_byte()?)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = resolve(&headers, mapping)?;
    let death_pos = match &mapping.death_outcome {
        Some(d) => Some(mapping.outcomes.iter().position(|o| o == d).ok_or_else(|| {
            Error::Schema(format!("death outcome `{d}` is not listed among outcomes"))
        })?),
        None => None,
    };

    let mut order: Vec<String> = Vec::new();
    let mut attrs: HashMap<String, UnitAttrs> = HashMap::new();
    let mut obs: HashMap<String, Vec<Observation>> = HashMap::new();
    let mut rejected = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let reject = |column: &str, message: String| RowError {
            line,
            column: column.to_string(),
            message,
        };

        let id = field(cols.unit);
        if id.is_empty() {
            rejected.push(reject(&mapping.unit, "empty unit id".into()));
            continue;
        }
        let year = match field(cols.year).parse::<i32>() {
            Ok(y) => y,
            Err(_) => {
                rejected.push(reject(&mapping.year, format!("`{}` is not a year", field(cols.year))));
                continue;
            }
        };
        let cohort = match field(cols.cohort).parse::<i32>() {
            Ok(y) => y,
            Err(_) => {
                rejected.push(reject(&mapping.cohort, format!("`{}` is not a year", field(cols.cohort))));
                continue;
            }
        };
        let gender = match field(cols.gender).parse::<Gender>() {
            Ok(g) => g,
            Err(e) => {
                rejected.push(reject(&mapping.gender, e.to_string()));
                continue;
            }
        };
        let shock_type = match cols.shock_type {
            Some(c) => match field(c).parse::<ShockType>() {
                Ok(s) => s,
                Err(e) => {
                    rejected.push(reject(mapping.shock_type.as_deref().unwrap_or(""), e.to_string()));
                    continue;
                }
            },
            None => ShockType::Myocardial,
        };
        let severity = match cols.severity {
            Some(c) if !field(c).is_empty() => match field(c).parse::<Severity>() {
                Ok(s) => Some(s),
                Err(e) => {
                    rejected.push(reject(mapping.severity.as_deref().unwrap_or(""), e.to_string()));
                    continue;
                }
            },
            _ => None,
        };

        let mut outcomes = Vec::with_capacity(cols.outcomes.len());
        let mut bad = None;
        for (k, &c) in cols.outcomes.iter().enumerate() {
            match parse_opt_f64(field(c)) {
                Ok(v) => outcomes.push(v),
                Err(msg) => {
                    bad = Some(reject(&mapping.outcomes[k], msg));
                    break;
                }
            }
        }
        let mut covariates = Vec::with_capacity(cols.covariates.len());
        if bad.is_none() {
            for (k, &c) in cols.covariates.iter().enumerate() {
                match parse_opt_f64(field(c)) {
                    Ok(v) => covariates.push(v),
                    Err(msg) => {
                        bad = Some(reject(&mapping.covariates[k], msg));
                        break;
                    }
                }
            }
        }
        if let Some(err) = bad {
            rejected.push(err);
            continue;
        }

        let alive = match cols.alive {
            Some(c) => match parse_bool(field(c)) {
                Some(a) => a,
                None => {
                    rejected.push(reject(
                        mapping.alive.as_deref().unwrap_or(""),
                        format!("`{}` is not a boolean", field(c)),
                    ));
                    continue;
                }
            },
            None => !matches!(death_pos.and_then(|d| outcomes[d]), Some(v) if v == 1.0),
        };
        if !alive {
            // Utilisation outcomes do not exist after death.
            for (k, v) in outcomes.iter_mut().enumerate() {
                if Some(k) != death_pos {
                    *v = None;
                }
            }
        }

        match attrs.get(id) {
            Some(a) => {
                if a.gender != gender || a.cohort != cohort || a.shock_type != shock_type || a.severity != severity {
                    return Err(Error::Integrity {
                        message: format!(
                            "unit attributes disagree between line {} and line {line}",
                            a.first_line
                        ),
                        keys: vec![(id.to_string(), year)],
                    });
                }
            }
            None => {
                order.push(id.to_string());
                attrs.insert(
                    id.to_string(),
                    UnitAttrs {
                        gender,
                        cohort,
                        shock_type,
                        severity,
                        first_line: line,
                    },
                );
            }
        }
        obs.entry(id.to_string()).or_default().push(Observation {
            year,
            outcomes,
            covariates,
            alive,
        });
    }

    let mut units = Vec::with_capacity(order.len());
    for id in order {
        let a = attrs.remove(&id).expect("attributes recorded with id");
        let mut observations = obs.remove(&id).unwrap_or_default();
        observations.sort_by_key(|o| o.year);
        units.push(UnitRecord {
            id,
            gender: a.gender,
            cohort: a.cohort,
            shock_type: a.shock_type,
            severity: a.severity,
            observations,
        });
    }
    let schema = PanelSchema::new(
        mapping.outcomes.clone(),
        mapping.covariates.clone(),
        mapping.death_outcome.clone(),
    );
    let dataset = PanelDataset::new(units, schema, Provenance::Ingested)?;
    Ok(Ingested { dataset, rejected })
}

pub fn ingest_csv(path: &Path, mapping: &ColumnMapping) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(std::io::BufReader::new(file), mapping)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the dataset in the layout of [`ColumnMapping::for_schema`].
pub fn write_writer<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let schema = ds.schema();
    let mut header = vec![
        "unit_id".to_string(),
        "year".into(),
        "cohort".into(),
        "gender".into(),
        "shock_type".into(),
        "severity".into(),
        "alive".into(),
    ];
    header.extend(schema.outcomes.iter().cloned());
    header.extend(schema.covariates.iter().cloned());
    w.write_record(&header)?;
    for u in ds.units() {
        for o in &u.observations {
            let mut rec = vec![
                u.id.clone(),
                o.year.to_string(),
                u.cohort.to_string(),
                u.gender.as_str().to_string(),
                u.shock_type.as_str().to_string(),
                u.severity.map(|s| s.as_str().to_string()).unwrap_or_default(),
                if o.alive { "1".into() } else { "0".into() },
            ];
            rec.extend(o.outcomes.iter().map(|v| fmt_opt(*v)));
            rec.extend(o.covariates.iter().map(|v| fmt_opt(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(ds: &PanelDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_writer(ds, std::io::BufWriter::new(file))
}

/// Two-column `year,index` table.
pub fn read_cpi_reader<R: Read>(reader: R) -> Result<BTreeMap<i32, f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let year = rec
            .get(0)
            .and_then(|s| s.trim().parse::<i32>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("CPI line {line}: bad year")))?;
        let index = rec
            .get(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidInput(format!("CPI line {line}: bad index")))?;
        out.insert(year, index);
    }
    Ok(out)
}

pub fn read_cpi_csv(path: &Path) -> Result<BTreeMap<i32, f64>> {
    read_cpi_reader(std::fs::File::open(path)?)
}
