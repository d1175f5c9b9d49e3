//! Reproducible experiment runner for the `talbot-core` pipelines.
//!
//! A run is described by a versioned TOML manifest. The runner validates it,
//! fills in defaults, executes one experiment and writes CSV tables, the
//! resolved manifest and a `summary.json` with one entry per gate.

pub mod cli;
pub mod manifest;
pub mod output;
pub mod run;

pub use manifest::{validate, Experiment, ManifestErrors, Overrides, RunManifest};
pub use run::{execute, Outcome};
