//! Stochastic steppers for the diagonal measurement dynamics plus the
//! reproducible noise source that drives them.
//!
//! On diagonal states the conditioned dynamics reduce to a classical
//! filtering equation for the probability vector,
//!
//! ```text
//! d p_k = a (v_k - <V>) p_k dW,      a = 2 sqrt(2 * strength)
//! ```
//!
//! with `v_k` the observable value at position `k` (one noise channel per
//! measured observable). Two integrators are provided:
//!
//! * `Exact`: the Gaussian-likelihood update
//!   `p_k <- p_k exp(a v_k dy - a^2 v_k^2 dt / 2) / Z` with
//!   `dy = dW + a <V> dt`. Expanding in powers of `dt` reproduces the
//!   filtering equation to first order, the weights are positive for any
//!   `dt`, and normalization is restored exactly by the single division.
//!   This is the default.
//! * `Euler`: the linearized update, kept for convergence cross-checks. It
//!   can push entries negative on large increments; those are clamped to
//!   zero and counted in [`StepDiagnostics`].

use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::state::{bit_from_left, DiagonalState, MeasurementModel, SystemKind};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizing mix with full avalanche; bijective on u64.
#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Counter-based Gaussian noise stream. The k-th draw is a pure function of
/// `(master_seed, trajectory_index, k)`, so a stream can be recreated on any
/// worker at any time and ensemble output never depends on scheduling.
///
/// Draws are standard normals from a Box-Muller pair over two 53-bit
/// uniforms; the second member of each pair is cached and served next.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    key: u64,
    counter: u64,
    spare: Option<f64>,
}

impl NoiseStream {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        // Mix each coordinate before combining so neighbouring seeds or
        // indices land on unrelated keys.
        let key = mix(master_seed ^ mix(trajectory_index.wrapping_add(GOLDEN)));
        NoiseStream { key, counter: 0, spare: None }
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in (0, 1]; never 0, so logs stay finite.
    #[inline]
    fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard normal draw.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(radius * sin);
        radius * cos
    }

    /// `count` independent Wiener increments for a step of length `dt`:
    /// mean 0, variance `dt`.
    pub fn wiener_increments(&mut self, count: usize, dt: f64) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill_wiener(dt, &mut out);
        out
    }

    /// Allocation-free variant for the hot loop.
    pub fn fill_wiener(&mut self, dt: f64, out: &mut [f64]) {
        let scale = dt.sqrt();
        for w in out {
            *w = scale * self.next_gaussian();
        }
    }
}

/// Integration scheme for one measurement step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Exact,
}

/// Step size and scheme. `dt` is in the same time units as `1/strength`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub method: Method,
}

impl StepParams {
    pub fn new(dt: f64, method: Method) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositive { name: "dt", value: dt });
        }
        Ok(StepParams { dt, method })
    }

    pub fn exact(dt: f64) -> Result<Self> {
        Self::new(dt, Method::Exact)
    }

    pub fn euler(dt: f64) -> Result<Self> {
        Self::new(dt, Method::Euler)
    }

    /// Step-size ceiling above which the Euler update is likely to clamp:
    /// `0.1 / (strength * 4 * gap^2)` with `gap` the largest eigenvalue
    /// separation of one measured observable (`d-1` for qudits, 2 per
    /// qubit). The exact scheme is stable for any `dt`; its accuracy is
    /// limited by how often feedback re-orders, not by stiffness.
    pub fn euler_dt_guidance(model: &MeasurementModel) -> f64 {
        let gap = match model.kind() {
            SystemKind::Qudit { dim } => (dim - 1) as f64,
            SystemKind::Register { .. } => 2.0,
        };
        0.1 / (model.strength() * 4.0 * gap * gap)
    }

    pub fn exceeds_euler_guidance(&self, model: &MeasurementModel) -> bool {
        self.method == Method::Euler && self.dt > Self::euler_dt_guidance(model)
    }
}

/// Counters exposed by the steppers; only Euler ever clamps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    /// Number of entries clamped to zero after a linearized update
    /// overshot. Nonzero counts signal that dt is too coarse for Euler.
    pub clamped_entries: u64,
}

/// Advances a qudit state by one step and returns the measurement record
/// increment `dr = sqrt(4 gamma) <X> dt + dW`. The record uses the printed
/// convention for the output coefficient; the dynamics are driven by `dW`
/// directly, so nothing downstream depends on that choice.
pub fn step_qudit(
    state: &mut DiagonalState,
    model: &MeasurementModel,
    params: &StepParams,
    dw: f64,
    diag: &mut StepDiagnostics,
) -> Result<f64> {
    let dim = match model.kind() {
        SystemKind::Qudit { dim } => dim,
        SystemKind::Register { .. } => return Err(Error::ExpectedQudit),
    };
    state.check_dimension(model)?;
    let gamma = model.strength();
    let a = 2.0 * (2.0 * gamma).sqrt();
    let dt = params.dt;
    let mean_x = state.expect_x(model)?;
    let record = (4.0 * gamma).sqrt() * mean_x * dt + dw;

    match params.method {
        Method::Exact => {
            let dy = dw + a * mean_x * dt;
            // exponent at position k; evaluated twice rather than stored,
            // the exp below dominates the cost anyway
            let exponent = |k: usize| {
                let x = k as f64;
                a * x * dy - 0.5 * a * a * x * x * dt
            };
            let mut emax = f64::NEG_INFINITY;
            for k in 0..dim {
                emax = emax.max(exponent(k));
            }
            let probs = state.probs_mut();
            let mut z = 0.0;
            for (k, p) in probs.iter_mut().enumerate() {
                *p *= (exponent(k) - emax).exp();
                z += *p;
            }
            for p in probs.iter_mut() {
                *p /= z;
            }
        }
        Method::Euler => {
            let probs = state.probs_mut();
            for (k, p) in probs.iter_mut().enumerate() {
                *p += a * (k as f64 - mean_x) * *p * dw;
                if *p < 0.0 {
                    *p = 0.0;
                    diag.clamped_entries += 1;
                }
            }
            state.renormalize();
        }
    }
    Ok(record)
}

/// Advances a register state by one step under `n` simultaneous single-qubit
/// measurements. `dws` carries one Wiener increment per qubit and
/// `records_out` receives the per-qubit record increments
/// `dr_r = sqrt(4 kappa) <Z_r> dt + dW_r`.
pub fn step_register(
    state: &mut DiagonalState,
    model: &MeasurementModel,
    params: &StepParams,
    dws: &[f64],
    records_out: &mut [f64],
    diag: &mut StepDiagnostics,
) -> Result<()> {
    let qubits = match model.kind() {
        SystemKind::Register { qubits } => qubits,
        SystemKind::Qudit { .. } => return Err(Error::ExpectedRegister),
    };
    state.check_dimension(model)?;
    if dws.len() != qubits {
        return Err(Error::NoiseDimensionMismatch { got: dws.len(), expected: qubits });
    }
    if records_out.len() != qubits {
        return Err(Error::NoiseDimensionMismatch { got: records_out.len(), expected: qubits });
    }
    let kappa = model.strength();
    let a = 2.0 * (2.0 * kappa).sqrt();
    let dt = params.dt;

    // <Z_r> for every qubit in one pass: -2 times the mass with bit r set.
    let mut means = [0.0f64; 64];
    let means = &mut means[..qubits];
    for (alpha, &p) in state.probs().iter().enumerate() {
        for (r, m) in means.iter_mut().enumerate() {
            if bit_from_left(alpha, r, qubits) {
                *m += p;
            }
        }
    }
    for m in means.iter_mut() {
        *m *= -2.0;
    }
    for r in 0..qubits {
        records_out[r] = (4.0 * kappa).sqrt() * means[r] * dt + dws[r];
    }

    match params.method {
        Method::Exact => {
            // Per-qubit weight factor for a set bit (z = -2):
            // a z dy_r - a^2 z^2 dt / 2 = -2 a dy_r - 2 a^2 dt.
            // A clear bit contributes nothing, so the exponent of a position
            // is the sum of the set-bit terms.
            let mut terms = [0.0f64; 64];
            let terms = &mut terms[..qubits];
            let mut emax = 0.0;
            for r in 0..qubits {
                let dy = dws[r] + a * means[r] * dt;
                terms[r] = -2.0 * a * dy - 2.0 * a * a * dt;
                if terms[r] > 0.0 {
                    emax += terms[r];
                }
            }
            let probs = state.probs_mut();
            let mut z = 0.0;
            for (alpha, p) in probs.iter_mut().enumerate() {
                let mut e = -emax;
                for (r, &term) in terms.iter().enumerate() {
                    if bit_from_left(alpha, r, qubits) {
                        e += term;
                    }
                }
                *p *= e.exp();
                z += *p;
            }
            for p in probs.iter_mut() {
                *p /= z;
            }
        }
        Method::Euler => {
            // single combined linear update over all channels
            let probs = state.probs_mut();
            for (alpha, p) in probs.iter_mut().enumerate() {
                let mut drive = 0.0;
                for (r, &m) in means.iter().enumerate() {
                    let z = if bit_from_left(alpha, r, qubits) { -2.0 } else { 0.0 };
                    drive += (z - m) * dws[r];
                }
                *p += a * drive * *p;
                if *p < 0.0 {
                    *p = 0.0;
                    diag.clamped_entries += 1;
                }
            }
            state.renormalize();
        }
    }
    Ok(())
}

/// First-passage targets and curve sampling grid for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Probes {
    /// Infidelity thresholds, strictly decreasing, each in (0, 1). May be
    /// empty when only curves are wanted.
    pub epsilons: Vec<f64>,
    /// Spacing of curve samples. Samples land on the step grid at the first
    /// step time reaching each multiple of the interval; an interval larger
    /// than `t_max` records the initial point only.
    pub sample_interval: f64,
}

impl Probes {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::NonPositive {
                name: "sample_interval",
                value: self.sample_interval,
            });
        }
        let mut prev = 1.0;
        for &eps in &self.epsilons {
            if !(eps > 0.0 && eps < 1.0) || eps >= prev {
                return Err(Error::EpsilonsNotDescending);
            }
            prev = eps;
        }
        Ok(())
    }
}

/// One sampled point of a trajectory's summary curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub ln_delta: f64,
    pub delta: f64,
    pub impurity: f64,
}

/// Everything recorded along a single trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    /// First time the infidelity reached each probe epsilon, aligned with
    /// `Probes::epsilons`; None when the threshold was not reached by
    /// `t_max`. Times are refined by linear interpolation of `ln(Delta)`
    /// between the bracketing steps.
    pub crossing_times: Vec<Option<f64>>,
    /// Curve samples at `t = 0, s, 2s, ...` up to `t_max`.
    pub curve: Vec<CurveSample>,
    /// Total Euler clamp count along the trajectory (0 for the exact scheme).
    pub clamped_entries: u64,
    /// State at the last simulated step.
    pub final_state: DiagonalState,
}

// ln(Delta) with the argument floored so pure states do not produce -inf.
#[inline]
fn ln_delta_of(delta: f64) -> f64 {
    delta.max(1e-300).ln()
}

/// Runs one trajectory from the completely mixed state: at every step draw
/// the Wiener increments, advance the state, then apply whatever permutation
/// the policy prescribes (so the arrangement seen by the next step reflects
/// this step's outcome). Crossing detection and curve sampling happen after
/// the feedback; permutations leave both infidelity and impurity unchanged.
///
/// The loop stops early once every epsilon has been crossed and no curve
/// sample remains to be taken.
pub fn simulate_trajectory(
    model: &MeasurementModel,
    policy: &FeedbackPolicy,
    params: &StepParams,
    stream: &mut NoiseStream,
    t_max: f64,
    probes: &Probes,
) -> Result<TrajectoryResult> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::NonPositive { name: "t_max", value: t_max });
    }
    policy.validate_for(model)?;
    probes.validate()?;

    let dt = params.dt;
    let n_steps = (t_max / dt + 1e-9).floor() as u64;
    let channels = model.noise_channels();
    let is_qudit = model.is_qudit();

    let mut state = DiagonalState::completely_mixed(model);
    let mut diag = StepDiagnostics::default();
    let mut dws = vec![0.0f64; channels];
    let mut records = vec![0.0f64; channels];

    // last probe index on the grid j * sample_interval that fits in t_max
    let last_probe = (t_max / probes.sample_interval + 1e-9).floor() as u64;
    let mut curve = Vec::with_capacity(last_probe as usize + 1);
    let mut next_probe = 1u64;

    let mut crossing_times: Vec<Option<f64>> = vec![None; probes.epsilons.len()];
    let mut eps_idx = 0;

    let delta0 = state.infidelity();
    let mut ln_delta_prev = ln_delta_of(delta0);
    while eps_idx < probes.epsilons.len() && delta0 <= probes.epsilons[eps_idx] {
        crossing_times[eps_idx] = Some(0.0);
        eps_idx += 1;
    }
    curve.push(CurveSample {
        t: 0.0,
        ln_delta: ln_delta_prev,
        delta: delta0,
        impurity: state.impurity(),
    });

    let mut last_applied = 0.0;
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        stream.fill_wiener(dt, &mut dws);
        if is_qudit {
            step_qudit(&mut state, model, params, dws[0], &mut diag)?;
        } else {
            step_register(&mut state, model, params, &dws, &mut records, &mut diag)?;
        }
        if let Some(permutation) = policy.decide(&state, model, t, last_applied)? {
            permutation.apply(&mut state)?;
            last_applied = t;
        }

        let delta = state.infidelity();
        let ln_delta = ln_delta_of(delta);
        while eps_idx < probes.epsilons.len() && delta <= probes.epsilons[eps_idx] {
            let target = probes.epsilons[eps_idx].ln();
            // fraction of the step at which ln(Delta) hit the target
            let frac = if ln_delta_prev > target && ln_delta < ln_delta_prev {
                ((ln_delta_prev - target) / (ln_delta_prev - ln_delta)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            crossing_times[eps_idx] = Some((t - dt) + frac * dt);
            eps_idx += 1;
        }
        while next_probe <= last_probe
            && next_probe as f64 * probes.sample_interval <= t + dt * 1e-6
        {
            curve.push(CurveSample {
                t: next_probe as f64 * probes.sample_interval,
                ln_delta,
                delta,
                impurity: state.impurity(),
            });
            next_probe += 1;
        }
        ln_delta_prev = ln_delta;

        if eps_idx == probes.epsilons.len() && next_probe > last_probe {
            break;
        }
    }

    Ok(TrajectoryResult {
        crossing_times,
        curve,
        clamped_entries: diag.clamped_entries,
        final_state: state,
    })
}
