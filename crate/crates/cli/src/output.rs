//! Deterministic output formatting. Every CSV is a pure function of the
//! aggregated statistics: fixed column order, every float printed with nine
//! significant digits, "nan" for undefined entries, newline-terminated.
//! Times go out multiplied by the measurement strength, so the files are in
//! dimensionless strength*t units regardless of the configured strength.

use std::fmt::Write as _;

use serde::Serialize;

use rapidmeas::{EnsembleStats, SpeedupReport};

use crate::config::ExperimentSpec;

/// Nine significant digits, scientific. The one number format in every file.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn sig9_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => sig9(v),
        None => "nan".to_string(),
    }
}

/// Rounds to the same nine significant digits the text formats carry, so
/// JSON output does not pretend to more precision than the CSVs.
pub fn round_sig9(x: f64) -> f64 {
    sig9(x).parse().unwrap_or(x)
}

fn round_sig9_opt(x: Option<f64>) -> Option<f64> {
    x.map(round_sig9)
}

pub fn curves_csv(stats: &EnsembleStats) -> String {
    let strength = stats.config.model.strength();
    let mut out =
        String::from("t,mean_ln_delta,sem_ln_delta,mean_delta,sem_delta,mean_impurity,sem_impurity\n");
    for p in &stats.curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig9(p.t * strength),
            sig9(p.mean_ln_delta),
            sig9_opt(p.sem_ln_delta),
            sig9(p.mean_delta),
            sig9_opt(p.sem_delta),
            sig9(p.mean_impurity),
            sig9_opt(p.sem_impurity),
        );
    }
    out
}

pub fn passage_csv(stats: &EnsembleStats) -> String {
    let strength = stats.config.model.strength();
    let mut out = String::from("epsilon,mean_T,sem_T,crossed,censored\n");
    for p in &stats.passages {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sig9(p.epsilon),
            sig9_opt(p.mean_t.map(|t| t * strength)),
            sig9_opt(p.sem_t.map(|t| t * strength)),
            p.crossed,
            p.censored,
        );
    }
    out
}

pub fn speedup_csv(report: &SpeedupReport) -> String {
    let mut out = String::from("epsilon,S,S_err\n");
    for p in &report.per_epsilon {
        let _ = writeln!(out, "{},{},{}", sig9(p.epsilon), sig9_opt(p.s), sig9_opt(p.s_err));
    }
    out
}

#[derive(Serialize)]
struct SpeedupSummary {
    asymptotic_s: Option<f64>,
    asymptotic_s_err: Option<f64>,
    baseline_slope: Option<f64>,
    candidate_slope: Option<f64>,
    fit_window_eps_min: Option<f64>,
    fit_window_eps_max: Option<f64>,
    bounds_lower: f64,
    bounds_upper: f64,
    published_fit: Option<f64>,
}

/// `strength` converts the fitted mean_T slopes into the same strength*t
/// units the CSV files use. The speed-up itself is a ratio and unaffected.
pub fn summary_json(report: &SpeedupReport, strength: f64) -> String {
    let a = report.asymptotic.as_ref();
    let summary = SpeedupSummary {
        asymptotic_s: round_sig9_opt(a.map(|a| a.s)),
        asymptotic_s_err: round_sig9_opt(a.map(|a| a.s_err)),
        baseline_slope: round_sig9_opt(a.map(|a| a.baseline.slope * strength)),
        candidate_slope: round_sig9_opt(a.map(|a| a.candidate.slope * strength)),
        fit_window_eps_min: round_sig9_opt(a.map(|a| a.window.0)),
        fit_window_eps_max: round_sig9_opt(a.map(|a| a.window.1)),
        bounds_lower: round_sig9(report.bounds.lower),
        bounds_upper: round_sig9(report.bounds.upper),
        published_fit: round_sig9_opt(report.published_fit),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct RunRecord<'a> {
    config: &'a ExperimentSpec,
    seed: u64,
    version: &'static str,
    timing_seconds: f64,
    warnings: &'a [String],
    notes: Notes,
}

#[derive(Serialize)]
struct Notes {
    mean_delta: &'static str,
}

/// Provenance record written next to the data files. `spec` must already
/// carry the effective seed (after any environment override) so that feeding
/// this file back through the CLI reproduces the run exactly.
pub fn run_json(spec: &ExperimentSpec, warnings: &[String], elapsed_seconds: f64) -> String {
    let record = RunRecord {
        config: spec,
        seed: spec.ensemble.master_seed,
        version: env!("CARGO_PKG_VERSION"),
        timing_seconds: round_sig9(elapsed_seconds),
        warnings,
        notes: Notes {
            mean_delta: "ensemble-mean infidelity and impurity curves are heavy-tail sensitive: \
                         rare slow-to-purify trajectories dominate them; mean_T is the robust \
                         observable",
        },
    };
    let mut text = serde_json::to_string_pretty(&record).expect("run record serializes");
    text.push('\n');
    text
}
