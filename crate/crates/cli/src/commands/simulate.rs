use staggerdid::dgp::{preset, preset_names, simulate as run_simulation, simulate_profiles, DgpSpec};
use staggerdid::eligibility::write_profiles_writer;
use staggerdid::panel::write_writer;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{stage_seed, OutputDir};

fn resolve_spec(cfg: &RunConfig) -> Result<DgpSpec, CliError> {
    let mut spec = match (&cfg.simulate.spec, &cfg.simulate.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("simulate.spec", format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config("simulate.spec", e.to_string()))?
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or("paper-shaped");
            preset(name).ok_or_else(|| {
                CliError::config(
                    "simulate.preset",
                    format!("unknown preset `{name}` (known: {})", preset_names().join(", ")),
                )
            })?
        }
    };
    spec.seed = cfg.seed;
    if let Some(n) = cfg.simulate.n_units {
        spec.n_units = n;
    }
    spec.validate().map_err(|e| CliError::config("simulate", e.to_string()))?;
    Ok(spec)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = resolve_spec(cfg)?;
    let mut out = OutputDir::create(cfg.output_dir()?)?;
    let (ds, truth) = run_simulation(&spec)?;
    let profiles = simulate_profiles(&spec, stage_seed(cfg.seed, "profiles"))?;

    let mut panel = Vec::new();
    write_writer(&ds, &mut panel)?;
    out.write("panel.csv", &panel)?;
    out.write_json("truth.json", &truth)?;
    let mut prof = Vec::new();
    write_profiles_writer(&profiles, &mut prof)?;
    out.write("profiles.csv", &prof)?;
    out.write_json("spec.json", &spec)?;

    out.count("units", ds.len());
    out.count("observations", ds.n_observations());
    out.count("cohorts", ds.cohort_sizes());
    println!("simulated {} units ({} observations)", ds.len(), ds.n_observations());
    out.finish("simulate", cfg)
}
