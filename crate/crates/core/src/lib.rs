//! Probabilistic hourly load forecasting from temperature scenarios.
//!
//! The pipeline runs ingest and DST normalization ([`data`]), feature
//! generation ([`features`]), per-hour subset selection ([`model`]),
//! shifted-date temperature scenarios ([`scenario`]) and pinball scoring
//! against a fixed benchmark ([`eval`]). [`orchestrator`] strings the stages
//! together for forecast rounds.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod ols;
pub mod orchestrator;
pub mod scenario;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
