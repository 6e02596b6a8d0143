//! Bootstrap inference: multiplier bootstrap over influence vectors and a
//! resampling (empirical) bootstrap used as a cross-check.

mod empirical;
mod multiplier;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use empirical::empirical_bootstrap;
pub use multiplier::{multiplier_bootstrap, multiplier_bootstrap_rows};

use crate::gtdid::{AggregateRow, EffectTable, GtEstimates, TableKind};
use crate::numerics::special::normal_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    /// Two-point law with mean 0, variance 1 and third moment 1.
    Mammen,
    Rademacher,
}

const SQRT5: f64 = 2.236_067_977_499_79;
const MAMMEN_LOW: f64 = (1.0 - SQRT5) / 2.0;
const MAMMEN_HIGH: f64 = (1.0 + SQRT5) / 2.0;
const MAMMEN_P_LOW: f64 = (SQRT5 + 1.0) / (2.0 * SQRT5);

impl WeightLaw {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            WeightLaw::Mammen => {
                if rng.random::<f64>() < MAMMEN_P_LOW {
                    MAMMEN_LOW
                } else {
                    MAMMEN_HIGH
                }
            }
            WeightLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl std::str::FromStr for WeightLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mammen" => Ok(WeightLaw::Mammen),
            "rademacher" => Ok(WeightLaw::Rademacher),
            other => Err(Error::InvalidInput(format!("unknown weight law `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandType {
    Pointwise,
    Simultaneous,
}

impl BandType {
    pub fn as_str(self) -> &'static str {
        match self {
            BandType::Pointwise => "pointwise",
            BandType::Simultaneous => "simultaneous",
        }
    }
}

impl std::str::FromStr for BandType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pointwise" => Ok(BandType::Pointwise),
            "simultaneous" | "uniform" => Ok(BandType::Simultaneous),
            other => Err(Error::InvalidInput(format!("unknown band type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub reps: usize,
    pub law: WeightLaw,
    pub seed: u64,
    pub band: BandType,
    pub level: f64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec {
            reps: 999,
            law: WeightLaw::Mammen,
            seed: 0,
            band: BandType::Simultaneous,
            level: 0.95,
        }
    }
}

impl BootstrapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 99 {
            return Err(Error::InvalidInput(format!("bootstrap reps must be at least 99, got {}", self.reps)));
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level must lie in (0.5, 1), got {}", self.level)));
        }
        Ok(())
    }

    pub fn pointwise_critical(&self) -> f64 {
        normal_quantile((1.0 + self.level) / 2.0)
    }
}

/// Standard errors, critical value and band per row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub critical_value: f64,
    pub pointwise_critical: f64,
    pub band: BandType,
    pub level: f64,
    pub bounds: Vec<(f64, f64)>,
    pub p_values: Vec<f64>,
    /// Rows whose bootstrap distribution collapsed to a point.
    pub degenerate: Vec<usize>,
    /// Resamples redrawn because a cohort went missing (empirical bootstrap).
    pub rejected_draws: usize,
    pub reps: usize,
    /// Quantiles of the bootstrap sup-t statistic: (probability, value).
    pub sup_t_quantiles: Vec<(f64, f64)>,
}

/// Below this (relative to the row's scale) a bootstrap spread counts as zero.
pub(crate) fn is_degenerate(se: f64, scale: f64) -> bool {
    !(se > 1e-13 * (1.0 + scale))
}

pub(crate) fn p_value(est: f64, se: f64, degenerate: bool) -> f64 {
    if degenerate {
        if est == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        crate::numerics::special::normal_two_sided_p(est / se)
    }
}

/// IQR / (z₀.₇₅ − z₀.₂₅).
pub(crate) fn iqr_se(sorted: &[f64]) -> f64 {
    use crate::numerics::quantile_sorted;
    let spread = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    spread / (2.0 * normal_quantile(0.75))
}

/// Critical value from per-draw sup statistics (sorted ascending).
pub(crate) fn critical_from_sup(
    spec: &BootstrapSpec,
    sup_sorted: &[f64],
    active_rows: usize,
) -> (f64, Vec<(f64, f64)>) {
    use crate::numerics::quantile_sorted;
    let z = spec.pointwise_critical();
    let summary: Vec<(f64, f64)> = if sup_sorted.is_empty() {
        Vec::new()
    } else {
        [0.5, 0.9, 0.95, 0.99].iter().map(|&q| (q, quantile_sorted(sup_sorted, q))).collect()
    };
    let c = match spec.band {
        BandType::Pointwise => z,
        BandType::Simultaneous if active_rows == 0 => z,
        BandType::Simultaneous => {
            let c = quantile_sorted(sup_sorted, spec.level);
            // The sup over several rows dominates any single row, so the
            // joint band is never narrower than the pointwise one.
            if active_rows >= 2 {
                c.max(z)
            } else {
                c
            }
        }
    };
    (c, summary)
}

/// Bootstrapped dynamic, cohort and overall tables for one set of estimates.
/// Each table gets its own multiplier draw from the same seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GtTables {
    pub dynamic: EffectTable,
    pub group: EffectTable,
    pub overall: EffectTable,
}

pub fn effect_tables(est: &GtEstimates, spec: &BootstrapSpec) -> Result<GtTables> {
    let one = |kind: TableKind, rows: &[AggregateRow]| -> Result<EffectTable> {
        let band = multiplier_bootstrap_rows(rows, spec)?;
        Ok(EffectTable::from_rows(kind, rows, &band)
            .with_metadata("exclude_year_zero", est.options.exclude_year_zero)
            .with_metadata("n_units", est.n_units))
    };
    Ok(GtTables {
        dynamic: one(TableKind::Dynamic, &est.dynamic)?,
        group: one(TableKind::Group, &est.group)?,
        overall: one(TableKind::Overall, &est.overall)?,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn mammen_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 999 * 200;
        let draws: Vec<f64> = (0..n).map(|_| WeightLaw::Mammen.draw(&mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.02, "variance {v}");
        // Exact moments of the law.
        let p = MAMMEN_P_LOW;
        assert!((p * MAMMEN_LOW + (1.0 - p) * MAMMEN_HIGH).abs() < 1e-15);
        assert!((p * MAMMEN_LOW.powi(2) + (1.0 - p) * MAMMEN_HIGH.powi(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spec_invariants() {
        assert!(BootstrapSpec::default().validate().is_ok());
        let few = BootstrapSpec {
            reps: 98,
            ..Default::default()
        };
        assert!(few.validate().is_err());
        let low = BootstrapSpec {
            level: 0.5,
            ..Default::default()
        };
        assert!(low.validate().is_err());
    }
}
