//! Command-line front end. Four subcommands: simulate one configured
//! ensemble, compare two ensembles as a speed-up, print the closed-form
//! reference numbers for a system size, and reproduce the bundled figure
//! datasets. All data outputs are deterministic for a fixed config; the
//! RAPIDMEAS_SEED environment variable overrides the configured master seed
//! (multi-arm commands offset it per arm to keep the arms independent).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use rapidmeas::{
    lo_speedup_bounds, nfb_mean_passage_time, published_fit, register_speedup_bounds,
    run_ensemble, speedup, time_to_average_level, CurveObservable, EnsembleConfig, EnsembleStats,
    StepParams, SystemKind, TheoryBounds,
};
use rapidmeas_cli::config;
use rapidmeas_cli::output::{self, round_sig9, sig9, sig9_opt};
use rapidmeas_cli::presets::{self, Figure, Scale};

#[derive(Parser)]
#[command(name = "rapidmeas", version, about = "Stochastic simulator for rapid purification of \
    continuously measured qudits and qubit registers under permutation feedback")]
struct Cli {
    /// Cap on parallel trajectory workers (default: all cores). Output
    /// content does not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured ensemble; writes curves.csv, passage.csv, run.json.
    Simulate {
        /// Experiment spec (TOML, or the JSON echoed into a previous run.json).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the spec's outputs.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a feedback candidate against a baseline over a shared
    /// threshold grid; writes speedup.csv and summary.json.
    Speedup {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Output directory (default: the candidate spec's outputs.directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print speed-up bounds, the published fit, and no-feedback reference
    /// passage times for one system size.
    Theory {
        /// Qudit dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Register size in qubits.
        #[arg(long)]
        qubits: Option<usize>,
    },
    /// Run a bundled figure preset; writes one CSV per plotted curve plus a
    /// manifest listing the theory overlays.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long, value_enum, default_value = "quick")]
        scale: Scale,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("--workers")?;
    }
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, out),
        Command::Speedup {
            baseline,
            candidate,
            out,
        } => cmd_speedup(&baseline, &candidate, out),
        Command::Theory { dim, qubits } => cmd_theory(dim, qubits),
        Command::Reproduce { figure, scale, out } => cmd_reproduce(figure, scale, &out),
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("RAPIDMEAS_SEED") {
        Ok(text) => {
            let seed = text.trim().parse::<u64>().with_context(|| {
                format!("RAPIDMEAS_SEED must be an unsigned integer, got {text:?}")
            })?;
            Ok(Some(seed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(err).context("reading RAPIDMEAS_SEED"),
    }
}

/// Pre-run diagnostics for one arm: an Euler step size past the positivity
/// guidance, or a horizon too short for the deepest threshold.
fn arm_warnings(ens: &EnsembleConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    if ens.params.exceeds_euler_guidance(&ens.model) {
        warnings.push(format!(
            "integrator.dt = {} exceeds the Euler positivity guidance {:.3e} for this system; \
             entries may clamp, prefer method = \"exact\" or a smaller step",
            ens.params.dt,
            StepParams::euler_dt_guidance(&ens.model),
        ));
    }
    if let Some(w) = ens.t_max_warning() {
        warnings.push(w);
    }
    warnings
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(config_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let started = Instant::now();
    let mut spec = config::load_spec(config_path)?;
    if let Some(seed) = seed_override()? {
        spec.ensemble.master_seed = seed;
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&spec.outputs.directory));
    spec.outputs.directory = dir.display().to_string();
    let ens = spec.to_ensemble_config()?;

    let mut warnings = arm_warnings(&ens);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let stats = run_ensemble(&ens)?;
    if stats.clamped_entries > 0 {
        let w = format!(
            "{} probability entries were clamped to zero by the Euler update",
            stats.clamped_entries
        );
        eprintln!("warning: {w}");
        warnings.push(w);
    }

    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("curves.csv"), &output::curves_csv(&stats))?;
    write_file(&dir.join("passage.csv"), &output::passage_csv(&stats))?;
    let elapsed = started.elapsed().as_secs_f64();
    write_file(&dir.join("run.json"), &output::run_json(&spec, &warnings, elapsed))?;
    Ok(())
}

fn cmd_speedup(baseline_path: &Path, candidate_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut base_spec = config::load_spec(baseline_path)?;
    let mut cand_spec = config::load_spec(candidate_path)?;
    if let Some(seed) = seed_override()? {
        base_spec.ensemble.master_seed = seed;
        cand_spec.ensemble.master_seed = seed + 1;
    }
    let base_ens = base_spec
        .to_ensemble_config()
        .with_context(|| format!("in {}", baseline_path.display()))?;
    let cand_ens = cand_spec
        .to_ensemble_config()
        .with_context(|| format!("in {}", candidate_path.display()))?;
    for w in arm_warnings(&base_ens) {
        eprintln!("warning (baseline): {w}");
    }
    for w in arm_warnings(&cand_ens) {
        eprintln!("warning (candidate): {w}");
    }

    let base_stats = run_ensemble(&base_ens)?;
    let cand_stats = run_ensemble(&cand_ens)?;
    let report = speedup(&base_stats, &cand_stats)?;

    let dir = out.unwrap_or_else(|| PathBuf::from(&cand_spec.outputs.directory));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("speedup.csv"), &output::speedup_csv(&report))?;
    write_file(
        &dir.join("summary.json"),
        &output::summary_json(&report, cand_ens.model.strength()),
    )?;
    Ok(())
}

fn cmd_theory(dim: Option<usize>, qubits: Option<usize>) -> Result<()> {
    let (kind, bounds): (SystemKind, TheoryBounds) = match (dim, qubits) {
        (Some(d), None) => (SystemKind::Qudit { dim: d }, lo_speedup_bounds(d)?),
        (None, Some(n)) => (SystemKind::Register { qubits: n }, register_speedup_bounds(n)?),
        _ => bail!("pass exactly one of --dim or --qubits"),
    };
    match kind {
        SystemKind::Qudit { dim } => println!("system: qudit (d = {dim})"),
        SystemKind::Register { qubits } => println!("system: register (n = {qubits})"),
    }
    println!(
        "speed-up bounds: lower = {}, upper = {}",
        sig9(bounds.lower),
        sig9(bounds.upper)
    );
    match published_fit(kind) {
        Some(fit) => println!("published fit: {}", sig9(fit)),
        None => println!("published fit: none"),
    }
    println!("no-feedback mean passage times (strength*t units):");
    println!("epsilon,T_nfb");
    for eps in presets::speedup_epsilons() {
        let t = nfb_mean_passage_time(eps, 1.0, kind)?;
        println!("{},{}", sig9(eps), sig9(t));
    }
    Ok(())
}

/// Per-curve manifest entry: where the data landed, which seeds produced it,
/// and the theory overlay values a plot of it would carry.
#[derive(Serialize)]
struct CurveSummary {
    label: String,
    file: String,
    size: usize,
    baseline_seed: u64,
    candidate_seed: u64,
    asymptotic_s: Option<f64>,
    asymptotic_s_err: Option<f64>,
    bounds_lower: f64,
    bounds_upper: f64,
    published_fit: Option<f64>,
}

#[derive(Serialize)]
struct ReproduceNotes {
    tolerance: &'static str,
    runtime_target: &'static str,
}

#[derive(Serialize)]
struct Manifest {
    figure: &'static str,
    scale: &'static str,
    trajectories: usize,
    seed_override: Option<u64>,
    files: Vec<String>,
    curves: Vec<CurveSummary>,
    notes: ReproduceNotes,
    timing_seconds: f64,
}

fn cmd_reproduce(figure: Figure, scale: Scale, out: &Path) -> Result<()> {
    let started = Instant::now();
    let mut pairs = presets::plan(figure, scale);
    let override_seed = seed_override()?;
    if let Some(base) = override_seed {
        let mut k = 0;
        for pair in &mut pairs {
            pair.baseline.master_seed = base + k;
            pair.candidate.master_seed = base + k + 1;
            k += 2;
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut runs = Vec::new();
    for pair in &pairs {
        for w in arm_warnings(&pair.baseline) {
            eprintln!("warning ({} baseline): {w}", pair.label);
        }
        for w in arm_warnings(&pair.candidate) {
            eprintln!("warning ({} candidate): {w}", pair.label);
        }
        let arm_started = Instant::now();
        let base_stats = run_ensemble(&pair.baseline)?;
        let cand_stats = run_ensemble(&pair.candidate)?;
        eprintln!(
            "ran {} ({} trajectories per arm, {:.1}s)",
            pair.label,
            pair.baseline.trajectories,
            arm_started.elapsed().as_secs_f64()
        );
        runs.push((pair, base_stats, cand_stats));
    }

    let mut files = Vec::new();
    let mut curves = Vec::new();
    match figure {
        Figure::Fig1 => {
            for (pair, base_stats, cand_stats) in &runs {
                let report = speedup(base_stats, cand_stats)?;
                let file = format!("{}_{}.csv", figure.name(), pair.label);
                write_file(&out.join(&file), &output::speedup_csv(&report))?;
                files.push(file.clone());
                curves.push(curve_summary(pair, file, &report));
            }
        }
        Figure::Fig2 | Figure::Fig4 => {
            let size_column = if figure == Figure::Fig2 { "d" } else { "n" };
            let mut csv = format!("{size_column},S,S_err,lower_bound,upper_bound,fit\n");
            let file = format!("{}_asymptotic.csv", figure.name());
            for (pair, base_stats, cand_stats) in &runs {
                let report = speedup(base_stats, cand_stats)?;
                let a = report.asymptotic.as_ref();
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    pair.size,
                    sig9_opt(a.map(|a| a.s)),
                    sig9_opt(a.map(|a| a.s_err)),
                    sig9(report.bounds.lower),
                    sig9(report.bounds.upper),
                    sig9_opt(report.published_fit),
                ));
                curves.push(curve_summary(pair, file.clone(), &report));
            }
            write_file(&out.join(&file), &csv)?;
            files.push(file);
        }
        Figure::Fig3 => {
            for (pair, base_stats, cand_stats) in &runs {
                let mut csv = String::from("level,S,S_err\n");
                for level in presets::impurity_levels() {
                    let (s, s_err) = level_speedup(base_stats, cand_stats, level);
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        sig9(level),
                        sig9_opt(s),
                        sig9_opt(s_err)
                    ));
                }
                let file = format!("{}_{}.csv", figure.name(), pair.label);
                write_file(&out.join(&file), &csv)?;
                files.push(file.clone());
                let bounds = lo_speedup_bounds(pair.size)?;
                let fit = published_fit(SystemKind::Qudit { dim: pair.size });
                curves.push(CurveSummary {
                    label: pair.label.clone(),
                    file,
                    size: pair.size,
                    baseline_seed: pair.baseline.master_seed,
                    candidate_seed: pair.candidate.master_seed,
                    asymptotic_s: None,
                    asymptotic_s_err: None,
                    bounds_lower: round_sig9(bounds.lower),
                    bounds_upper: round_sig9(bounds.upper),
                    published_fit: fit.map(round_sig9),
                });
            }
        }
    }

    let manifest = Manifest {
        figure: figure.name(),
        scale: scale.name(),
        trajectories: scale.trajectories(),
        seed_override: override_seed,
        files,
        curves,
        notes: ReproduceNotes {
            tolerance: match scale {
                Scale::Quick => {
                    "400 trajectories per arm: standard errors are about 3.2x wider than at \
                     full scale, so allow that much extra scatter against bounds and fits"
                }
                Scale::Full => "4000 trajectories per arm",
            },
            runtime_target: "quick targets under two minutes on a laptop; full targets under \
                             an hour",
        },
        timing_seconds: round_sig9(started.elapsed().as_secs_f64()),
    };
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    write_file(&out.join(format!("{}_manifest.json", figure.name())), &manifest_text)?;
    Ok(())
}

fn curve_summary(
    pair: &presets::SpeedupPair,
    file: String,
    report: &rapidmeas::SpeedupReport,
) -> CurveSummary {
    let a = report.asymptotic.as_ref();
    CurveSummary {
        label: pair.label.clone(),
        file,
        size: pair.size,
        baseline_seed: pair.baseline.master_seed,
        candidate_seed: pair.candidate.master_seed,
        asymptotic_s: a.map(|a| round_sig9(a.s)),
        asymptotic_s_err: a.map(|a| round_sig9(a.s_err)),
        bounds_lower: round_sig9(report.bounds.lower),
        bounds_upper: round_sig9(report.bounds.upper),
        published_fit: report.published_fit.map(round_sig9),
    }
}

/// Ratio of the two arms' times to pull the mean impurity down to `level`,
/// with first-order error propagation. None when either curve is censored at
/// that level or starts below it.
fn level_speedup(
    base: &EnsembleStats,
    cand: &EnsembleStats,
    level: f64,
) -> (Option<f64>, Option<f64>) {
    let base_cross = time_to_average_level(base, CurveObservable::Impurity, level);
    let cand_cross = time_to_average_level(cand, CurveObservable::Impurity, level);
    let (Some(b), Some(c)) = (base_cross, cand_cross) else {
        return (None, None);
    };
    if !(b.t > 0.0 && c.t > 0.0) {
        return (None, None);
    }
    let s = b.t / c.t;
    let s_err = match (b.t_err, c.t_err) {
        (Some(be), Some(ce)) => Some(s * ((be / b.t).powi(2) + (ce / c.t).powi(2)).sqrt()),
        _ => None,
    };
    (Some(s), s_err)
}
