//! Portfolio-level catastrophe risk analysis: a trial-based simulation
//! engine over pre-simulated event tables, with primary- and
//! secondary-uncertainty loss estimation, deterministic synthetic data
//! generation, and the usual tail risk metrics.
//!
//! The pipeline: [`datagen`] (or files read via [`io`]) produces a
//! [`model::YearEventTable`] and [`model::Portfolio`]; [`engine`] turns
//! them into a [`model::YearLossTable`], resolving each event occurrence
//! against per-XELT loss lookups and netting losses through the layer's
//! financial terms; [`metrics`] reduces the result to PML, TVaR, and the
//! exceedance curve. [`stats`] and [`uncertainty`] hold the numerical
//! kernel behind secondary-uncertainty sampling.

pub mod datagen;
pub mod engine;
pub mod io;
pub mod metrics;
pub mod model;
pub mod stats;
pub mod uncertainty;

pub use engine::{LookupBackend, Mode, RunConfig};
pub use model::{Currency, Portfolio, YearEventTable, YearLossTable};
pub use stats::Precision;
