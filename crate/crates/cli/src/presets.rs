//! Preset ensemble suites behind the reproduce command. Each figure is a
//! fixed list of baseline/candidate arm pairs with baked-in seeds, so a given
//! (figure, scale) pair always produces the same bytes.
//!
//! All presets use strength 1.0, the exact stepper at dt = 1e-3, and a
//! completely mixed initial state. Times in the outputs are therefore already
//! in dimensionless strength*t units.

use rapidmeas::{EnsembleConfig, FeedbackPolicy, MeasurementModel, OrderingKind, StepParams};

/// Half-decade threshold grid from 1e-1 down to 1e-6. The asymptotic
/// extrapolation window (smallest two decades) then holds five points.
pub fn speedup_epsilons() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

/// Mean linear-entropy levels for the impurity-based speed-up curves. Levels
/// the baseline curve never reaches within its horizon come out as nan rows.
pub fn impurity_levels() -> Vec<f64> {
    vec![
        0.5, 0.3, 0.2, 0.1, 0.05, 0.03, 0.02, 0.01, 5e-3, 3e-3, 2e-3, 1e-3,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Per-threshold speed-up S(epsilon) for qudits of dimension 3, 4, 5.
    Fig1,
    /// Asymptotic speed-up against qudit dimension, with bounds and fit.
    Fig2,
    /// Speed-up in time to reach a mean-impurity level; continual ordering
    /// for d = 3, 4, 5 plus a periodically ordered d = 4 arm.
    Fig3,
    /// Asymptotic speed-up against register size n = 1, 2, 3.
    Fig4,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }

    fn seed_base(self) -> u64 {
        match self {
            Figure::Fig1 => 7100,
            Figure::Fig2 => 7200,
            Figure::Fig3 => 7300,
            Figure::Fig4 => 7400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// Reduced trajectory count; expect visibly wider scatter.
    Quick,
    /// Production trajectory count.
    Full,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Quick => "quick",
            Scale::Full => "full",
        }
    }

    pub fn trajectories(self) -> usize {
        match self {
            Scale::Quick => 400,
            Scale::Full => 4000,
        }
    }
}

/// One plotted curve: a no-feedback baseline and a feedback candidate over
/// the same model. `size` is the qudit dimension or register qubit count.
#[derive(Debug, Clone)]
pub struct SpeedupPair {
    pub label: String,
    pub size: usize,
    pub baseline: EnsembleConfig,
    pub candidate: EnsembleConfig,
}

const PRESET_DT: f64 = 1e-3;

// Horizons sized so the slowest arm crosses its deepest threshold or level
// comfortably; censoring still shows up honestly in the outputs if a quick
// run gets unlucky.
const QUDIT_NFB_T_MAX: f64 = 10.0;
const QUDIT_FB_T_MAX: f64 = 7.0;
const IMPURITY_NFB_T_MAX: f64 = 14.0;
const IMPURITY_FB_T_MAX: f64 = 5.0;
const REGISTER_NFB_T_MAX: f64 = 3.0;
const REGISTER_FB_T_MAX: f64 = 2.0;

fn arm(
    model: MeasurementModel,
    policy: FeedbackPolicy,
    trajectories: usize,
    seed: u64,
    t_max: f64,
    epsilons: Vec<f64>,
    sample_interval: f64,
) -> EnsembleConfig {
    EnsembleConfig {
        model,
        policy,
        params: StepParams::exact(PRESET_DT).expect("preset dt is positive"),
        trajectories,
        master_seed: seed,
        t_max,
        epsilons,
        sample_interval,
    }
}

/// Builds the arm list for a figure. Arm seeds are `base + k` with `k` the
/// arm's position in the flattened (baseline, candidate, baseline, ...)
/// order; a seed override replaces `base` while keeping the offsets, so the
/// arms stay mutually independent.
pub fn plan(figure: Figure, scale: Scale) -> Vec<SpeedupPair> {
    let n_traj = scale.trajectories();
    let base = figure.seed_base();
    let mut next_seed = base;
    let mut seed = || {
        let s = next_seed;
        next_seed += 1;
        s
    };

    match figure {
        Figure::Fig1 | Figure::Fig2 => (3..=5)
            .map(|dim| {
                let model = MeasurementModel::qudit(dim, 1.0).expect("preset dim is valid");
                SpeedupPair {
                    label: format!("d{dim}"),
                    size: dim,
                    baseline: arm(
                        model,
                        FeedbackPolicy::None,
                        n_traj,
                        seed(),
                        QUDIT_NFB_T_MAX,
                        speedup_epsilons(),
                        0.5,
                    ),
                    candidate: arm(
                        model,
                        FeedbackPolicy::LOrder,
                        n_traj,
                        seed(),
                        QUDIT_FB_T_MAX,
                        speedup_epsilons(),
                        0.5,
                    ),
                }
            })
            .collect(),
        Figure::Fig3 => {
            let continual = (3..=5).map(|dim| (format!("d{dim}"), dim, FeedbackPolicy::LOrder));
            let periodic = std::iter::once((
                "d4_periodic".to_string(),
                4,
                FeedbackPolicy::Periodic {
                    interval: 0.2,
                    inner: OrderingKind::LOrder,
                },
            ));
            continual
                .chain(periodic)
                .map(|(label, dim, policy)| {
                    let model = MeasurementModel::qudit(dim, 1.0).expect("preset dim is valid");
                    SpeedupPair {
                        label,
                        size: dim,
                        baseline: arm(
                            model,
                            FeedbackPolicy::None,
                            n_traj,
                            seed(),
                            IMPURITY_NFB_T_MAX,
                            Vec::new(),
                            0.02,
                        ),
                        candidate: arm(
                            model,
                            policy,
                            n_traj,
                            seed(),
                            IMPURITY_FB_T_MAX,
                            Vec::new(),
                            0.02,
                        ),
                    }
                })
                .collect()
        }
        Figure::Fig4 => (1..=3)
            .map(|qubits| {
                let model =
                    MeasurementModel::register(qubits, 1.0).expect("preset size is valid");
                SpeedupPair {
                    label: format!("n{qubits}"),
                    size: qubits,
                    baseline: arm(
                        model,
                        FeedbackPolicy::None,
                        n_traj,
                        seed(),
                        REGISTER_NFB_T_MAX,
                        speedup_epsilons(),
                        0.25,
                    ),
                    candidate: arm(
                        model,
                        FeedbackPolicy::HOrder,
                        n_traj,
                        seed(),
                        REGISTER_FB_T_MAX,
                        speedup_epsilons(),
                        0.25,
                    ),
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_grid_spans_five_decades_in_half_decade_steps() {
        let eps = speedup_epsilons();
        assert_eq!(eps.len(), 11);
        assert!((eps[0] - 1e-1).abs() < 1e-15);
        assert!((eps[10] - 1e-6).abs() < 1e-18);
        for pair in eps.windows(2) {
            assert!((pair[1] / pair[0] - 10f64.powf(-0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn every_preset_arm_passes_ensemble_validation() {
        for figure in [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4] {
            for scale in [Scale::Quick, Scale::Full] {
                for pair in plan(figure, scale) {
                    pair.baseline.validate().expect("baseline arm is valid");
                    pair.candidate.validate().expect("candidate arm is valid");
                    assert_eq!(pair.baseline.model, pair.candidate.model);
                    assert_eq!(pair.baseline.epsilons, pair.candidate.epsilons);
                    assert!(pair.baseline.t_max_warning().is_none(), "{}", pair.label);
                    assert!(pair.candidate.t_max_warning().is_none(), "{}", pair.label);
                }
            }
        }
    }

    #[test]
    fn preset_seeds_are_distinct_within_and_across_figures() {
        let mut seeds = Vec::new();
        for figure in [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4] {
            for pair in plan(figure, Scale::Full) {
                seeds.push(pair.baseline.master_seed);
                seeds.push(pair.candidate.master_seed);
            }
        }
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }

    #[test]
    fn figure_contents_match_their_descriptions() {
        let labels =
            |f: Figure| plan(f, Scale::Quick).iter().map(|p| p.label.clone()).collect::<Vec<_>>();
        assert_eq!(labels(Figure::Fig1), ["d3", "d4", "d5"]);
        assert_eq!(labels(Figure::Fig2), ["d3", "d4", "d5"]);
        assert_eq!(labels(Figure::Fig3), ["d3", "d4", "d5", "d4_periodic"]);
        assert_eq!(labels(Figure::Fig4), ["n1", "n2", "n3"]);
        for pair in plan(Figure::Fig3, Scale::Quick) {
            assert!(pair.baseline.epsilons.is_empty());
            assert_eq!(pair.baseline.policy, FeedbackPolicy::None);
        }
    }
}
