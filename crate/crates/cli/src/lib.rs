//! Library half of the rapidmeas binary: configuration parsing, the
//! deterministic output formats, and the preset reproduction suites. Split
//! out of main.rs so integration tests can exercise the plumbing directly.

pub mod config;
pub mod output;
pub mod presets;
