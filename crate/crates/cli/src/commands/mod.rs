mod diagnose;
mod estimate;
mod robustness;
mod simulate;

pub use diagnose::diagnose;
pub use estimate::estimate;
pub use robustness::{match_genders, tripledid, twfe};
pub use simulate::simulate;

use serde::Serialize;
use staggerdid::gtdid::EffectTable;

use crate::error::CliError;
use crate::output::OutputDir;

/// Serialised name of a unit-like enum variant.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn write_table(out: &mut OutputDir, stem: &str, table: &EffectTable) -> Result<(), CliError> {
    out.write(&format!("{stem}.csv"), table.to_csv_string()?.as_bytes())?;
    out.write_json(&format!("{stem}.json"), table)
}
