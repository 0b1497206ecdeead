//! Diagonal conditioned states and the measurement models they evolve under.
//!
//! The conditioned density matrix stays diagonal in the measurement basis for
//! every dynamic in this crate, so a state is just a probability vector over
//! basis positions. For a qudit, position `k` carries observable value
//! `x_k = k`; for an `n`-qubit register, position `alpha` is read as a
//! big-endian `n`-bit string and each qubit `r` carries the shifted value
//! `z_r = 0` when bit `r` is 0 and `z_r = -2` when it is 1.

use crate::error::{Error, Result};

/// Constructed states must sum to 1 within this tolerance; steppers
/// renormalize after every update so drift never accumulates.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Largest register size the dense representation accepts (the state vector
/// has `2^n` entries).
pub const MAX_QUBITS: usize = 20;

/// Strength conversion between the two system kinds, for side-by-side
/// comparisons only; it is never applied implicitly. A single continuously
/// measured qubit at strength `kappa` follows the same trajectory law as a
/// two-level qudit at `gamma = 4 kappa`: the qubit observable separates its
/// two outcomes by an eigenvalue gap of 2 rather than 1, and measurement
/// rates scale with the square of the gap.
pub const QUDIT_GAMMA_PER_REGISTER_KAPPA: f64 = 4.0;

/// Whether bit `r` of `alpha` is set, counting bits from the left of the
/// big-endian `n`-bit string. `bit_from_left(0b01, 0, 2)` is false and
/// `bit_from_left(0b01, 1, 2)` is true.
#[inline]
pub fn bit_from_left(alpha: usize, r: usize, n: usize) -> bool {
    debug_assert!(r < n);
    (alpha >> (n - 1 - r)) & 1 == 1
}

/// The kind of system being measured, which fixes the basis size and the
/// observable eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// A d-level system measured through one observable with eigenvalues
    /// `0, 1, ..., d-1`.
    Qudit { dim: usize },
    /// n qubits, each independently measured through its own shifted
    /// observable with eigenvalues `{0, -2}`.
    Register { qubits: usize },
}

impl SystemKind {
    /// Number of basis positions: `d` for a qudit, `2^n` for a register.
    pub fn dimension(&self) -> usize {
        match *self {
            SystemKind::Qudit { dim } => dim,
            SystemKind::Register { qubits } => 1 << qubits,
        }
    }
}

/// A measurement configuration: system kind plus strength (gamma for qudits,
/// kappa per qubit for registers, units of inverse time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    kind: SystemKind,
    strength: f64,
}

impl MeasurementModel {
    pub fn qudit(dim: usize, strength: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension { dim });
        }
        Self::checked(SystemKind::Qudit { dim }, strength)
    }

    pub fn register(qubits: usize, strength: f64) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return Err(Error::InvalidQubitCount { qubits, max: MAX_QUBITS });
        }
        Self::checked(SystemKind::Register { qubits }, strength)
    }

    fn checked(kind: SystemKind, strength: f64) -> Result<Self> {
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(Error::NonPositive { name: "strength", value: strength });
        }
        Ok(MeasurementModel { kind, strength })
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn is_qudit(&self) -> bool {
        matches!(self.kind, SystemKind::Qudit { .. })
    }

    pub fn is_register(&self) -> bool {
        matches!(self.kind, SystemKind::Register { .. })
    }

    /// Number of qubits for registers, None for qudits.
    pub fn qubits(&self) -> Option<usize> {
        match self.kind {
            SystemKind::Register { qubits } => Some(qubits),
            SystemKind::Qudit { .. } => None,
        }
    }

    /// Number of independent noise channels driving one step: 1 for a qudit,
    /// n for a register.
    pub fn noise_channels(&self) -> usize {
        match self.kind {
            SystemKind::Qudit { .. } => 1,
            SystemKind::Register { qubits } => qubits,
        }
    }

    /// Observable eigenvalue at position `k` of a qudit.
    pub fn x_value(&self, k: usize) -> f64 {
        debug_assert!(self.is_qudit() && k < self.dimension());
        k as f64
    }

    /// Shifted eigenvalue of qubit `r`'s observable at register position
    /// `alpha`: 0 when bit `r` of `alpha` is 0, -2 when it is 1.
    pub fn z_value(&self, alpha: usize, r: usize) -> f64 {
        match self.kind {
            SystemKind::Register { qubits } => {
                debug_assert!(alpha < self.dimension() && r < qubits);
                if bit_from_left(alpha, r, qubits) {
                    -2.0
                } else {
                    0.0
                }
            }
            SystemKind::Qudit { .. } => panic!("z_value on a qudit model"),
        }
    }
}

/// A diagonal conditioned state: `probs[k]` is the eigenvalue of the density
/// matrix currently sitting at basis position `k`. Stored by position, not by
/// rank; feedback permutes positions and ranks are recovered on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    probs: Vec<f64>,
}

impl DiagonalState {
    /// The maximally uncertain starting point: every position at `1/D`.
    pub fn completely_mixed(model: &MeasurementModel) -> Self {
        let dim = model.dimension();
        DiagonalState { probs: vec![1.0 / dim as f64; dim] }
    }

    /// Validates non-negativity and normalization before accepting the vector.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewEntries(probs.len()));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::BadProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(DiagonalState { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dimension(&self) -> usize {
        self.probs.len()
    }

    /// One minus the largest eigenvalue; 0 for a pure state, `1 - 1/D` for
    /// the completely mixed one.
    pub fn infidelity(&self) -> f64 {
        1.0 - self.probs.iter().fold(f64::MIN, |m, &p| m.max(p))
    }

    /// Linear entropy `1 - sum(p^2)`; same range as the infidelity.
    pub fn impurity(&self) -> f64 {
        1.0 - self.probs.iter().map(|&p| p * p).sum::<f64>()
    }

    /// First position holding the largest eigenvalue.
    pub fn max_position(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }

    /// Mean of the qudit observable, `sum_k k p_k`.
    pub fn expect_x(&self, model: &MeasurementModel) -> Result<f64> {
        if !model.is_qudit() {
            return Err(Error::ExpectedQudit);
        }
        self.check_dimension(model)?;
        Ok(self.probs.iter().enumerate().map(|(k, &p)| k as f64 * p).sum())
    }

    /// Mean of qubit `r`'s shifted observable: `-2` times the probability
    /// that bit `r` is set. Lies in `[-2, 0]`.
    pub fn expect_z(&self, model: &MeasurementModel, r: usize) -> Result<f64> {
        let qubits = match model.kind() {
            SystemKind::Register { qubits } => qubits,
            SystemKind::Qudit { .. } => return Err(Error::ExpectedRegister),
        };
        if r >= qubits {
            return Err(Error::QubitOutOfRange { index: r, qubits });
        }
        self.check_dimension(model)?;
        let mut mass = 0.0;
        for (alpha, &p) in self.probs.iter().enumerate() {
            if bit_from_left(alpha, r, qubits) {
                mass += p;
            }
        }
        Ok(-2.0 * mass)
    }

    /// Positions sorted by descending probability, ties broken by ascending
    /// position so the ordering is deterministic.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        order.sort_unstable_by(|&i, &j| {
            self.probs[j].total_cmp(&self.probs[i]).then(i.cmp(&j))
        });
        order
    }

    pub(crate) fn check_dimension(&self, model: &MeasurementModel) -> Result<()> {
        if self.probs.len() != model.dimension() {
            return Err(Error::DimensionMismatch {
                state: self.probs.len(),
                model: model.dimension(),
            });
        }
        Ok(())
    }

    pub(crate) fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    pub(crate) fn renormalize(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        for p in &mut self.probs {
            *p /= sum;
        }
    }
}
