//! Group-time average treatment effects over rolling-window not-yet-treated
//! risk sets, and their aggregation to event-time, cohort and overall effects.

mod aggregate;
mod cell;
mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate_dynamic, aggregate_group, aggregate_overall, cell_rows, AggregateRow, OverallMode, RowLabel,
};
pub use cell::{att_gt, att_gt_doubly_robust, att_gt_unconditional, CellFlag, GroupTimeCell, NuisanceFits};
pub use table::{EffectRow, EffectTable, TableKind};

use crate::panel::{ControlStrategy, PanelDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Unconditional,
    DoublyRobust,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "unconditional" | "simple" => Ok(Estimator::Unconditional),
            "doubly_robust" | "dr" => Ok(Estimator::DoublyRobust),
            other => Err(Error::InvalidInput(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Everything needed to estimate one outcome's group-time cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtConfig {
    pub outcome: String,
    pub window: i32,
    pub strategy: ControlStrategy,
    pub estimator: Estimator,
    /// Propensity-score covariates, read in year g−1.
    pub ps_covariates: Vec<String>,
    /// Outcome-regression covariates, read in year g−1.
    pub or_covariates: Vec<String>,
    /// Controls with fitted propensity above this get zero weight.
    pub trim: f64,
    pub e_min: i32,
    pub e_max: i32,
}

impl GtConfig {
    pub fn new(outcome: &str) -> Self {
        GtConfig {
            outcome: outcome.to_string(),
            window: 5,
            strategy: ControlStrategy::NotYetTreatedWindow,
            estimator: Estimator::DoublyRobust,
            ps_covariates: Vec::new(),
            or_covariates: Vec::new(),
            trim: 0.995,
            e_min: -4,
            e_max: 4,
        }
    }

    /// Same covariates in both nuisance models.
    pub fn with_covariates(mut self, covariates: &[&str]) -> Self {
        self.ps_covariates = covariates.iter().map(|s| s.to_string()).collect();
        self.or_covariates = self.ps_covariates.clone();
        self
    }

    pub fn validate(&self, ds: &PanelDataset) -> Result<()> {
        ds.outcome_index(&self.outcome)?;
        for c in self.ps_covariates.iter().chain(&self.or_covariates) {
            ds.covariate_index(c)?;
        }
        if self.window < 1 {
            return Err(Error::InvalidInput(format!("window must be at least 1, got {}", self.window)));
        }
        if self.e_min > self.e_max {
            return Err(Error::InvalidInput(format!("empty event-time range {}..{}", self.e_min, self.e_max)));
        }
        if !(self.trim > 0.0 && self.trim <= 1.0) {
            return Err(Error::InvalidInput(format!("trim must lie in (0, 1], got {}", self.trim)));
        }
        Ok(())
    }
}

/// Cohorts that can serve as treated groups: shock year inside the span with
/// a baseline year before it.
pub fn treated_cohorts(ds: &PanelDataset) -> Vec<i32> {
    ds.cohorts()
        .into_iter()
        .filter(|&g| ds.in_span(g) && ds.in_span(g - 1))
        .collect()
}

/// One cell per (treated cohort, event time) pair; infeasible cells carry
/// their reason instead of being dropped. Sorted by (g, e).
pub fn estimate_all_cells(ds: &PanelDataset, cfg: &GtConfig) -> Result<Vec<GroupTimeCell>> {
    cfg.validate(ds)?;
    let pairs: Vec<(i32, i32)> = treated_cohorts(ds)
        .into_iter()
        .flat_map(|g| (cfg.e_min..=cfg.e_max).map(move |e| (g, g + e)))
        .collect();
    pairs
        .par_iter()
        .map(|&(g, t)| att_gt(ds, cfg, g, t).map(|(cell, _)| cell))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationOptions {
    /// Drop e = 0 from group and overall aggregates.
    pub exclude_year_zero: bool,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        AggregationOptions {
            exclude_year_zero: false,
        }
    }
}

/// Cells plus every aggregate of them, ready for inference.
#[derive(Debug, Clone)]
pub struct GtEstimates {
    pub n_units: usize,
    pub cells: Vec<GroupTimeCell>,
    pub dynamic: Vec<AggregateRow>,
    pub group: Vec<AggregateRow>,
    pub overall: Vec<AggregateRow>,
    pub options: AggregationOptions,
}

impl GtEstimates {
    pub fn dynamic_estimate(&self, e: i32) -> Option<f64> {
        self.dynamic
            .iter()
            .find(|r| r.label == RowLabel::Event(e))
            .and_then(|r| r.estimate)
    }
}

pub fn estimate(ds: &PanelDataset, cfg: &GtConfig, opts: AggregationOptions) -> Result<GtEstimates> {
    let cells = estimate_all_cells(ds, cfg)?;
    let n = ds.len();
    let dynamic = aggregate_dynamic(&cells, n);
    let group = aggregate_group(&cells, n, opts.exclude_year_zero);
    let overall = vec![
        aggregate_overall(&cells, n, OverallMode::CohortSize, opts.exclude_year_zero),
        aggregate_overall(&cells, n, OverallMode::EventTimeMean, opts.exclude_year_zero),
    ];
    Ok(GtEstimates {
        n_units: n,
        cells,
        dynamic,
        group,
        overall,
        options: opts,
    })
}
