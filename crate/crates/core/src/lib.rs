//! Staggered difference-in-differences with rolling-window not-yet-treated
//! controls.
//!
//! The crate is organised around the estimation pipeline:
//!
//! - [`panel`]: long-format panel data, CSV ingestion and dataset transforms.
//! - [`eligibility`]: analytical-sample construction (CHA₂DS₂-VASc exclusions).
//! - [`numerics`]: logistic/least-squares fits, fixed-effects demeaning,
//!   cluster-robust covariance and distribution functions.
//! - [`gtdid`]: group-time ATT estimators and their aggregation.
//! - [`inference`]: multiplier and empirical bootstrap bands.
//! - [`alt`]: TWFE event study, triple difference and propensity-score matching.
//! - [`dgp`]: synthetic staggered-adoption panels with known ground truth.

pub mod alt;
pub mod dgp;
pub mod eligibility;
pub mod error;
pub mod gtdid;
pub mod inference;
pub mod numerics;
pub mod panel;

pub use error::{Error, Result};
