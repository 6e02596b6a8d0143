use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use staggerdid::gtdid::Estimator;
use staggerdid::inference::{BandType, BootstrapSpec, WeightLaw};
use staggerdid::panel::{ColumnMapping, ControlStrategy, Gender, Severity, ShockType};

use crate::error::CliError;

pub const DEFAULT_COVARIATES: [&str; 5] = ["age", "income", "education", "married", "single"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GenderSelection {
    Female,
    Male,
    /// Each gender estimated separately.
    Both,
}

impl GenderSelection {
    pub fn genders(self) -> Vec<Gender> {
        match self {
            GenderSelection::Female => vec![Gender::Female],
            GenderSelection::Male => vec![Gender::Male],
            GenderSelection::Both => vec![Gender::Female, Gender::Male],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IncomeHalf {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Household {
    Single,
    NonSingle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub reps: usize,
    pub law: WeightLaw,
    pub band: BandType,
    pub level: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = BootstrapSpec::default();
        BootstrapSection {
            reps: d.reps,
            law: d.law,
            band: d.band,
            level: d.level,
        }
    }
}

/// Subgroup restrictions, all read at the unit's baseline year.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Filters {
    /// Split at the median baseline income of the selected gender.
    pub income: Option<IncomeHalf>,
    pub household: Option<Household>,
    pub shock_type: Option<ShockType>,
    pub severity: Option<Severity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalancedSection {
    pub enabled: bool,
    pub pre: u32,
    pub post: u32,
}

impl Default for BalancedSection {
    fn default() -> Self {
        BalancedSection {
            enabled: false,
            pre: 5,
            post: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    /// JSON generator specification; overrides `preset`.
    pub spec: Option<PathBuf>,
    pub n_units: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSection {
    /// Largest allowed propensity difference within a pair.
    pub caliper: Option<f64>,
    /// Also run the group-time estimator on the matched sample.
    pub estimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventStudySection {
    pub e_min: i32,
    pub e_max: i32,
    /// Defaults to the window.
    pub lag: Option<i32>,
    pub base: i32,
}

impl Default for EventStudySection {
    fn default() -> Self {
        EventStudySection {
            e_min: -5,
            e_max: 4,
            lag: None,
            base: -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub outcome: String,
    pub gender: GenderSelection,
    pub window: i32,
    pub control_strategy: ControlStrategy,
    pub estimator: Estimator,
    pub covariates: Vec<String>,
    pub trim: f64,
    pub e_min: i32,
    pub e_max: i32,
    pub exclude_year_zero: bool,
    pub seed: u64,
    pub bootstrap: BootstrapSection,
    pub filters: Filters,
    pub balanced: BalancedSection,
    pub cpi: Option<PathBuf>,
    pub base_year: Option<i32>,
    pub profiles: Option<PathBuf>,
    pub columns: Option<ColumnMapping>,
    pub simulate: SimulateSection,
    #[serde(rename = "match")]
    pub matching: MatchSection,
    pub event_study: EventStudySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: None,
            outcome: "statins".into(),
            gender: GenderSelection::Both,
            window: 5,
            control_strategy: ControlStrategy::NotYetTreatedWindow,
            estimator: Estimator::DoublyRobust,
            covariates: DEFAULT_COVARIATES.iter().map(|s| s.to_string()).collect(),
            trim: 0.995,
            e_min: -4,
            e_max: 4,
            exclude_year_zero: false,
            seed: 0,
            bootstrap: BootstrapSection::default(),
            filters: Filters::default(),
            balanced: BalancedSection::default(),
            cpi: None,
            base_year: None,
            profiles: None,
            columns: None,
            simulate: SimulateSection::default(),
            matching: MatchSection::default(),
            event_study: EventStudySection::default(),
        }
    }
}

/// Command-line values that replace file settings when given.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML (or .json) configuration file.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, short = 'i')]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long, value_enum)]
    pub gender: Option<GenderSelection>,
    #[arg(long)]
    pub window: Option<i32>,
    #[arg(long, value_parser = parse_from_str::<ControlStrategy>)]
    pub control_strategy: Option<ControlStrategy>,
    #[arg(long, value_parser = parse_from_str::<Estimator>)]
    pub estimator: Option<Estimator>,
    /// Comma-separated covariate names; an empty string means none.
    #[arg(long)]
    pub covariates: Option<String>,
    #[arg(long)]
    pub trim: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub e_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub e_max: Option<i32>,
    #[arg(long)]
    pub exclude_year_zero: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, visible_alias = "bootstrap-reps")]
    pub reps: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<WeightLaw>)]
    pub weight_law: Option<WeightLaw>,
    #[arg(long, value_parser = parse_from_str::<BandType>)]
    pub band: Option<BandType>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub income: Option<IncomeHalf>,
    #[arg(long, value_enum)]
    pub household: Option<Household>,
    #[arg(long, value_parser = parse_from_str::<ShockType>)]
    pub shock_type: Option<ShockType>,
    #[arg(long, value_parser = parse_from_str::<Severity>)]
    pub severity: Option<Severity>,
    /// Keep only units observed alive over the full event window.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub cpi: Option<PathBuf>,
    #[arg(long)]
    pub base_year: Option<i32>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n_units: Option<usize>,
    #[arg(long)]
    pub caliper: Option<f64>,
    /// After matching, estimate group-time effects on the matched sample.
    #[arg(long)]
    pub matched_estimate: bool,
    #[arg(long)]
    pub lag: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub event_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub event_max: Option<i32>,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = staggerdid::Error>,
{
    s.parse().map_err(|e: staggerdid::Error| e.to_string())
}

pub fn read_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    }
}

impl RunConfig {
    /// File settings (or defaults) with command-line overrides applied.
    pub fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
        let mut c = match &o.config {
            Some(p) => read_config_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        if o.input.is_some() {
            c.input = o.input.clone();
        }
        if o.output.is_some() {
            c.output = o.output.clone();
        }
        set!(c.outcome, o.outcome);
        set!(c.gender, o.gender);
        set!(c.window, o.window);
        set!(c.control_strategy, o.control_strategy);
        set!(c.estimator, o.estimator);
        if let Some(list) = &o.covariates {
            c.covariates = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        }
        set!(c.trim, o.trim);
        set!(c.e_min, o.e_min);
        set!(c.e_max, o.e_max);
        c.exclude_year_zero |= o.exclude_year_zero;
        set!(c.seed, o.seed);
        set!(c.bootstrap.reps, o.reps);
        set!(c.bootstrap.law, o.weight_law);
        set!(c.bootstrap.band, o.band);
        set!(c.bootstrap.level, o.level);
        if o.income.is_some() {
            c.filters.income = o.income;
        }
        if o.household.is_some() {
            c.filters.household = o.household;
        }
        if o.shock_type.is_some() {
            c.filters.shock_type = o.shock_type;
        }
        if o.severity.is_some() {
            c.filters.severity = o.severity;
        }
        c.balanced.enabled |= o.balanced;
        if o.cpi.is_some() {
            c.cpi = o.cpi.clone();
        }
        if o.base_year.is_some() {
            c.base_year = o.base_year;
        }
        if o.profiles.is_some() {
            c.profiles = o.profiles.clone();
        }
        if o.preset.is_some() {
            c.simulate.preset = o.preset.clone();
        }
        if o.spec.is_some() {
            c.simulate.spec = o.spec.clone();
        }
        if o.n_units.is_some() {
            c.simulate.n_units = o.n_units;
        }
        if o.caliper.is_some() {
            c.matching.caliper = o.caliper;
        }
        c.matching.estimate |= o.matched_estimate;
        if o.lag.is_some() {
            c.event_study.lag = o.lag;
        }
        set!(c.event_study.e_min, o.event_min);
        set!(c.event_study.e_max, o.event_max);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if ![3, 5, 7].contains(&self.window) {
            return Err(CliError::config("window", format!("must be 3, 5 or 7, got {}", self.window)));
        }
        if self.e_min > self.e_max {
            return Err(CliError::config("e_min", format!("{} exceeds e_max {}", self.e_min, self.e_max)));
        }
        if !(self.trim > 0.0 && self.trim <= 1.0) {
            return Err(CliError::config("trim", format!("must lie in (0, 1], got {}", self.trim)));
        }
        if self.bootstrap.reps < 99 {
            return Err(CliError::config("bootstrap.reps", format!("must be at least 99, got {}", self.bootstrap.reps)));
        }
        if !(self.bootstrap.level > 0.5 && self.bootstrap.level < 1.0) {
            return Err(CliError::config("bootstrap.level", format!("must lie in (0.5, 1), got {}", self.bootstrap.level)));
        }
        if self.cpi.is_some() != self.base_year.is_some() {
            return Err(CliError::config("base_year", "cpi and base_year must be given together".into()));
        }
        if let Some(c) = self.matching.caliper {
            if !(c >= 0.0) {
                return Err(CliError::config("match.caliper", format!("must be non-negative, got {c}")));
            }
        }
        if let Some(n) = self.simulate.n_units {
            if n == 0 {
                return Err(CliError::config("simulate.n_units", "must be positive".into()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.covariates.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(CliError::config("covariates", format!("`{dup}` listed twice")));
        }
        Ok(())
    }

    pub fn bootstrap_spec(&self, seed: u64) -> BootstrapSpec {
        BootstrapSpec {
            reps: self.bootstrap.reps,
            law: self.bootstrap.law,
            seed,
            band: self.bootstrap.band,
            level: self.bootstrap.level,
        }
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::config("output", "an output directory is required".into()))
    }

    pub fn input_path(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::config("input", "an input panel is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "outcome = \"gp_visits\"\nwindow = 3\n[bootstrap]\nreps = 199\n[filters]\nhousehold = \"single\"\n",
        )
        .unwrap();
        let o = Overrides {
            config: Some(path),
            window: Some(7),
            ..Default::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!(c.outcome, "gp_visits");
        assert_eq!(c.window, 7);
        assert_eq!(c.bootstrap.reps, 199);
        assert_eq!(c.filters.household, Some(Household::Single));
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_window_names_the_field() {
        let o = Overrides {
            window: Some(8),
            ..Default::default()
        };
        let err = RunConfig::resolve(&o).unwrap_err();
        assert!(err.to_string().starts_with("window:"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[bootstrap]\nrepz = 5\n").unwrap();
        let o = Overrides {
            config: Some(path),
            ..Default::default()
        };
        let err = RunConfig::resolve(&o).unwrap_err();
        assert!(err.to_string().contains("repz"), "{err}");
    }
}
