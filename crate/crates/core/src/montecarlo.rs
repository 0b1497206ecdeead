//! Trajectory ensembles and their statistics: first-passage tables, ensemble
//! mean curves, speed-up ratios and the asymptotic extrapolation.
//!
//! Mean passage time is the workhorse observable; unlike the mean infidelity
//! it is not dominated by rare slow-to-purify trajectories, so its SEM is an
//! honest uncertainty. Trajectories that never reach a threshold within t_max
//! are censored: excluded from that threshold's mean and counted separately.
//! With t_max at or above the guidance value the censored fraction is
//! negligible; drive it down deliberately and the exclusion bias shows up
//! long before the counts do, which is why the counts are mandatory output.
//!
//! Determinism: trajectory i draws from its own counter-based stream keyed by
//! (master_seed, i), and aggregation runs serially in index order after the
//! parallel phase, so results are bit-identical for a fixed config no matter
//! how many workers rayon schedules.

use rayon::prelude::*;

use crate::engine::{simulate_trajectory, NoiseStream, Probes, StepParams};
use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::state::{MeasurementModel, SystemKind};
use crate::theory::{self, TheoryBounds};

/// Everything needed to reproduce an ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub model: MeasurementModel,
    pub policy: FeedbackPolicy,
    pub params: StepParams,
    pub trajectories: usize,
    pub master_seed: u64,
    pub t_max: f64,
    /// First-passage thresholds, strictly decreasing, each in (0, 1).
    pub epsilons: Vec<f64>,
    /// Spacing of the mean-curve sample grid; must not be finer than dt.
    pub sample_interval: f64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate_for(&self.model)?;
        if self.trajectories == 0 {
            return Err(Error::NoTrajectories);
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::NonPositive { name: "t_max", value: self.t_max });
        }
        if self.sample_interval < self.params.dt {
            return Err(Error::SampleIntervalBelowDt {
                sample_interval: self.sample_interval,
                dt: self.params.dt,
            });
        }
        self.probes().validate()
    }

    fn probes(&self) -> Probes {
        Probes { epsilons: self.epsilons.clone(), sample_interval: self.sample_interval }
    }

    /// Suggested minimum t_max: twice the no-feedback mean passage time of
    /// the smallest threshold. Feedback only shortens passage, so this keeps
    /// censoring negligible for every policy.
    pub fn t_max_guidance(&self) -> Option<f64> {
        let eps_min = *self.epsilons.last()?;
        let t = theory::nfb_mean_passage_time(eps_min, self.model.strength(), self.model.kind())
            .ok()?;
        Some(2.0 * t)
    }

    /// A human-readable warning when t_max is below the guidance value.
    pub fn t_max_warning(&self) -> Option<String> {
        let guidance = self.t_max_guidance()?;
        if self.t_max < guidance {
            Some(format!(
                "t_max = {} is below the guidance value {:.3} for the smallest epsilon; \
                 expect censored trajectories and a low-biased mean passage time",
                self.t_max, guidance
            ))
        } else {
            None
        }
    }
}

/// First-passage statistics for one threshold. Means and SEMs are None when
/// no trajectory crossed (or, for the SEM, when fewer than two did).
#[derive(Debug, Clone, PartialEq)]
pub struct PassageStats {
    pub epsilon: f64,
    pub mean_t: Option<f64>,
    pub sem_t: Option<f64>,
    pub crossed: usize,
    pub censored: usize,
}

/// Ensemble means and SEMs of the summary observables at one probe time.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub mean_ln_delta: f64,
    pub sem_ln_delta: Option<f64>,
    pub mean_delta: f64,
    pub sem_delta: Option<f64>,
    pub mean_impurity: f64,
    pub sem_impurity: Option<f64>,
}

/// Aggregated output of run_ensemble, with the config echoed for provenance.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub config: EnsembleConfig,
    pub passages: Vec<PassageStats>,
    pub curve: Vec<CurvePoint>,
    pub mean_final_probs: Vec<f64>,
    pub sem_final_probs: Vec<Option<f64>>,
    /// Total entries clamped to zero across all trajectories (Euler only).
    pub clamped_entries: u64,
}

/// Running mean and scatter without storing samples.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// Standard error of the mean; needs at least two samples.
    fn sem(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let var = self.m2 / (self.n - 1) as f64;
        Some((var / self.n as f64).sqrt())
    }
}

/// Runs the configured number of trajectories (in parallel when a rayon pool
/// provides workers) and aggregates serially in trajectory order.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleStats> {
    config.validate()?;
    let probes = config.probes();

    let results = (0..config.trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = NoiseStream::new(config.master_seed, i);
            simulate_trajectory(
                &config.model,
                &config.policy,
                &config.params,
                &mut stream,
                config.t_max,
                &probes,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let curve_len = results[0].curve.len();
    let dim = config.model.dimension();
    let mut passage_acc = vec![Welford::default(); config.epsilons.len()];
    let mut censored = vec![0usize; config.epsilons.len()];
    let mut ln_acc = vec![Welford::default(); curve_len];
    let mut delta_acc = vec![Welford::default(); curve_len];
    let mut impurity_acc = vec![Welford::default(); curve_len];
    let mut prob_acc = vec![Welford::default(); dim];
    let mut clamped = 0u64;

    for r in &results {
        debug_assert_eq!(r.curve.len(), curve_len);
        for (j, crossing) in r.crossing_times.iter().enumerate() {
            match crossing {
                Some(t) => passage_acc[j].push(*t),
                None => censored[j] += 1,
            }
        }
        for (i, sample) in r.curve.iter().enumerate() {
            ln_acc[i].push(sample.ln_delta);
            delta_acc[i].push(sample.delta);
            impurity_acc[i].push(sample.impurity);
        }
        for (k, &p) in r.final_state.probs().iter().enumerate() {
            prob_acc[k].push(p);
        }
        clamped += r.clamped_entries;
    }

    let passages = config
        .epsilons
        .iter()
        .zip(passage_acc.iter().zip(&censored))
        .map(|(&epsilon, (acc, &censored))| PassageStats {
            epsilon,
            mean_t: acc.mean(),
            sem_t: acc.sem(),
            crossed: acc.n as usize,
            censored,
        })
        .collect();

    let curve = results[0]
        .curve
        .iter()
        .enumerate()
        .map(|(i, sample)| CurvePoint {
            t: sample.t,
            mean_ln_delta: ln_acc[i].mean().unwrap(),
            sem_ln_delta: ln_acc[i].sem(),
            mean_delta: delta_acc[i].mean().unwrap(),
            sem_delta: delta_acc[i].sem(),
            mean_impurity: impurity_acc[i].mean().unwrap(),
            sem_impurity: impurity_acc[i].sem(),
        })
        .collect();

    Ok(EnsembleStats {
        config: config.clone(),
        passages,
        curve,
        mean_final_probs: prob_acc.iter().map(|a| a.mean().unwrap()).collect(),
        sem_final_probs: prob_acc.iter().map(|a| a.sem()).collect(),
        clamped_entries: clamped,
    })
}

/// Weighted least-squares line through (x, y) = (ln(1/epsilon), mean_T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits mean_T against ln(1/epsilon) over thresholds inside
/// [eps_min, eps_max], weighting each point by 1/sem^2 when every usable
/// point carries a SEM and falling back to an unweighted fit otherwise.
/// Censored-out thresholds (no crossings at all) are skipped.
pub fn passage_slope(passages: &[PassageStats], eps_min: f64, eps_max: f64) -> Result<LineFit> {
    let slack = 1.0 + 1e-9;
    let mut pts: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for p in passages {
        if p.epsilon >= eps_min / slack && p.epsilon <= eps_max * slack {
            if let Some(mean) = p.mean_t {
                pts.push(((1.0 / p.epsilon).ln(), mean, p.sem_t));
            }
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientEpsilonGrid("fewer than 3 usable thresholds in the window"));
    }

    let weighted = pts.iter().all(|&(_, _, sem)| matches!(sem, Some(s) if s > 0.0));
    let w = |sem: Option<f64>| if weighted { 1.0 / (sem.unwrap() * sem.unwrap()) } else { 1.0 };

    let wsum: f64 = pts.iter().map(|&(_, _, s)| w(s)).sum();
    let xbar: f64 = pts.iter().map(|&(x, _, s)| w(s) * x).sum::<f64>() / wsum;
    let ybar: f64 = pts.iter().map(|&(_, y, s)| w(s) * y).sum::<f64>() / wsum;
    let sxx: f64 = pts.iter().map(|&(x, _, s)| w(s) * (x - xbar) * (x - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = pts.iter().map(|&(x, y, s)| w(s) * (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let slope_err = if weighted {
        // variance from the known per-point variances
        (1.0 / sxx).sqrt()
    } else {
        // residual-based estimate
        let ss_res: f64 = pts
            .iter()
            .map(|&(x, y, _)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let dof = (pts.len() - 2) as f64;
        (ss_res / dof / sxx).sqrt()
    };

    Ok(LineFit { slope, slope_err, intercept, points: pts.len() })
}

/// Slope-ratio extrapolation of the speed-up to epsilon -> 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSpeedup {
    pub s: f64,
    pub s_err: f64,
    pub baseline: LineFit,
    pub candidate: LineFit,
    /// The epsilon window the slopes were fitted over.
    pub window: (f64, f64),
}

/// Fits both arms' mean_T vs ln(1/epsilon) over the smallest two decades of
/// the shared grid and returns the slope ratio. Intercepts cancel, so the
/// finite-time transient offsets of the two arms drop out.
pub fn asymptotic_speedup(
    baseline: &[PassageStats],
    candidate: &[PassageStats],
) -> Result<AsymptoticSpeedup> {
    if baseline.len() != candidate.len()
        || baseline.iter().zip(candidate).any(|(b, c)| b.epsilon != c.epsilon)
    {
        return Err(Error::EpsilonGridMismatch);
    }
    let eps_min = match baseline.last() {
        Some(p) => p.epsilon,
        None => return Err(Error::InsufficientEpsilonGrid("empty threshold grid")),
    };
    let eps_max_grid = baseline[0].epsilon;
    if eps_max_grid / eps_min < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientEpsilonGrid("grid spans fewer than two decades"));
    }
    let window = (eps_min, eps_min * 100.0);
    let b = passage_slope(baseline, window.0, window.1)?;
    let c = passage_slope(candidate, window.0, window.1)?;
    if !(b.slope > 0.0 && c.slope > 0.0) {
        return Err(Error::DegenerateFit);
    }
    let s = b.slope / c.slope;
    let rel_b = b.slope_err / b.slope;
    let rel_c = c.slope_err / c.slope;
    let s_err = s * (rel_b * rel_b + rel_c * rel_c).sqrt();
    Ok(AsymptoticSpeedup { s, s_err, baseline: b, candidate: c, window })
}

/// Speed-up at one threshold: ratio of mean passage times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupPoint {
    pub epsilon: f64,
    pub s: Option<f64>,
    pub s_err: Option<f64>,
}

/// Per-threshold and asymptotic speed-ups of a feedback arm over a baseline,
/// with the theory bounds and published fit for the system attached.
#[derive(Debug, Clone)]
pub struct SpeedupReport {
    pub per_epsilon: Vec<SpeedupPoint>,
    pub asymptotic: Option<AsymptoticSpeedup>,
    pub bounds: TheoryBounds,
    pub published_fit: Option<f64>,
}

/// Compares two ensembles over the same model and threshold grid. The
/// asymptotic entry is None when the grid cannot support the extrapolation;
/// ratio errors come from first-order propagation of the two SEMs.
pub fn speedup(baseline: &EnsembleStats, candidate: &EnsembleStats) -> Result<SpeedupReport> {
    if baseline.config.model != candidate.config.model {
        return Err(Error::ModelMismatch);
    }
    if baseline.passages.len() != candidate.passages.len()
        || baseline
            .passages
            .iter()
            .zip(&candidate.passages)
            .any(|(b, c)| b.epsilon != c.epsilon)
    {
        return Err(Error::EpsilonGridMismatch);
    }

    let per_epsilon = baseline
        .passages
        .iter()
        .zip(&candidate.passages)
        .map(|(b, c)| {
            let s = match (b.mean_t, c.mean_t) {
                (Some(tb), Some(tc)) if tc > 0.0 => Some(tb / tc),
                _ => None,
            };
            let s_err = match (s, b.mean_t, b.sem_t, c.mean_t, c.sem_t) {
                (Some(s), Some(tb), Some(eb), Some(tc), Some(ec)) => {
                    let rel_b = eb / tb;
                    let rel_c = ec / tc;
                    Some(s * (rel_b * rel_b + rel_c * rel_c).sqrt())
                }
                _ => None,
            };
            SpeedupPoint { epsilon: b.epsilon, s, s_err }
        })
        .collect();

    let asymptotic = match asymptotic_speedup(&baseline.passages, &candidate.passages) {
        Ok(a) => Some(a),
        Err(Error::InsufficientEpsilonGrid(_)) | Err(Error::DegenerateFit) => None,
        Err(e) => return Err(e),
    };

    let (bounds, fit) = match baseline.config.model.kind() {
        SystemKind::Qudit { dim } => {
            (theory::lo_speedup_bounds(dim)?, theory::published_fit(SystemKind::Qudit { dim }))
        }
        SystemKind::Register { qubits } => (
            theory::register_speedup_bounds(qubits)?,
            theory::published_fit(SystemKind::Register { qubits }),
        ),
    };

    Ok(SpeedupReport { per_epsilon, asymptotic, bounds, published_fit: fit })
}

/// Which ensemble-mean curve a level threshold applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveObservable {
    LnDelta,
    Delta,
    Impurity,
}

/// Where the mean curve reaches a level, with the uncertainty induced by the
/// curve's SEM at the crossing (None when the local slope vanishes or SEMs
/// are unavailable).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCrossing {
    pub t: f64,
    pub t_err: Option<f64>,
}

/// First time the ensemble-mean curve drops to `level`, linearly interpolated
/// between probe points. Returns None (censored) if the curve never gets
/// there; returns t = 0 if the curve starts at or below the level.
pub fn time_to_average_level(
    stats: &EnsembleStats,
    observable: CurveObservable,
    level: f64,
) -> Option<LevelCrossing> {
    let value = |p: &CurvePoint| match observable {
        CurveObservable::LnDelta => p.mean_ln_delta,
        CurveObservable::Delta => p.mean_delta,
        CurveObservable::Impurity => p.mean_impurity,
    };
    let sem = |p: &CurvePoint| match observable {
        CurveObservable::LnDelta => p.sem_ln_delta,
        CurveObservable::Delta => p.sem_delta,
        CurveObservable::Impurity => p.sem_impurity,
    };

    let first = stats.curve.first()?;
    if value(first) <= level {
        return Some(LevelCrossing { t: first.t, t_err: Some(0.0) });
    }
    for pair in stats.curve.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let (v0, v1) = (value(prev), value(next));
        if v1 <= level {
            let frac = ((v0 - level) / (v0 - v1)).clamp(0.0, 1.0);
            let t = prev.t + frac * (next.t - prev.t);
            let slope = (v0 - v1) / (next.t - prev.t);
            let t_err = match (sem(prev), sem(next)) {
                (Some(s0), Some(s1)) if slope > 0.0 => {
                    Some((s0 + frac * (s1 - s0)) / slope)
                }
                _ => None,
            };
            return Some(LevelCrossing { t, t_err });
        }
    }
    None
}
