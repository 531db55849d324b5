//! Redistribution of income on risky, multiplicatively growing human
//! capital.
//!
//! Agents turn human capital into income one-to-one, pay taxes under one of
//! three schemes, receive an equal share of the taxes net of administrative
//! cost, and reinvest their income with a random log-normal growth factor.
//! The crate simulates that process, estimates long-run growth factors and
//! sweeps them over tax and admin rates.

pub mod analysis;
pub mod econ;
pub mod error;
pub mod eta;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod trajectory;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "cli")]
pub mod config;
#[cfg(feature = "cli")]
pub mod output;

pub use econ::{FiscalPolicy, IncomeVector, Scheme, TaxAssessment};
pub use error::{Error, Result};
pub use eta::{DrawMatrix, EtaSpec, LogNormalParams, RiskPreset};
pub use sweep::{GrowthSurface, SweepGrid};
pub use trajectory::{EnsembleSummary, GrowthEstimate, Trajectory};
