//! Config-driven command-line surface over the `weierlab` library:
//! preset registry, JSON run configs with field-by-field overrides,
//! reproducible seeded experiments, CSV/JSON artifacts and a run manifest.

pub mod commands;
pub mod config;
pub mod csvfmt;
pub mod error;
pub mod manifest;
pub mod presets;

pub use error::CliError;
