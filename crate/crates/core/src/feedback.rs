//! Feedback policies and the basis permutations they prescribe.
//!
//! Permutation feedback swaps populations between measurement basis states,
//! which is equivalent to relabeling the measured observable. The orderings
//! here maximize the squared separation between the most likely outcome and
//! the ensemble mean, which is what sets the instantaneous purification rate.
//! A brute-force enumerator over all arrangements serves as the optimality
//! oracle in tests.

use crate::error::{Error, Result};
use crate::state::{DiagonalState, MeasurementModel};

/// A rearrangement of basis positions. `mapping[k]` is the source position
/// whose probability moves to position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(dimension: usize) -> Self {
        Permutation { mapping: (0..dimension).collect() }
    }

    /// Validates that `mapping` is a bijection on 0..len.
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &s in &mapping {
            if s >= mapping.len() || seen[s] {
                return Err(Error::NotABijection);
            }
            seen[s] = true;
        }
        Ok(Permutation { mapping })
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(k, &s)| k == s)
    }

    /// Rearranges the state's probabilities in place.
    pub fn apply(&self, state: &mut DiagonalState) -> Result<()> {
        if self.mapping.len() != state.dimension() {
            return Err(Error::DimensionMismatch {
                state: state.dimension(),
                model: self.mapping.len(),
            });
        }
        let src = state.probs().to_vec();
        let dst = state.probs_mut();
        for (k, &s) in self.mapping.iter().enumerate() {
            dst[k] = src[s];
        }
        Ok(())
    }
}

/// Which ordering a periodic policy applies when it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingKind {
    LOrder,
    HOrder,
}

/// When and how the controller rearranges the basis.
///
/// Ordering policies act after every measurement step. The periodic variant
/// lets the measurement run uncontrolled and applies its inner ordering only
/// when `interval` (in units of 1/strength) has elapsed since the last
/// application.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackPolicy {
    None,
    LOrder,
    HOrder,
    Periodic { interval: f64, inner: OrderingKind },
}

impl FeedbackPolicy {
    /// L-ordering is defined for qudits, H-ordering for registers; periodic
    /// policies inherit the restriction of their inner ordering.
    pub fn validate_for(&self, model: &MeasurementModel) -> Result<()> {
        let kind = match self {
            FeedbackPolicy::None => return Ok(()),
            FeedbackPolicy::LOrder => OrderingKind::LOrder,
            FeedbackPolicy::HOrder => OrderingKind::HOrder,
            FeedbackPolicy::Periodic { interval, inner } => {
                if !(*interval > 0.0 && interval.is_finite()) {
                    return Err(Error::NonPositive { name: "interval", value: *interval });
                }
                *inner
            }
        };
        match kind {
            OrderingKind::LOrder if !model.is_qudit() => Err(Error::ExpectedQudit),
            OrderingKind::HOrder if !model.is_register() => Err(Error::ExpectedRegister),
            _ => Ok(()),
        }
    }

    /// Returns the permutation to apply at time `t`, if any. Ordering
    /// policies always return one (possibly the identity); the periodic
    /// variant fires once `interval/strength` has elapsed since
    /// `last_applied`, with a relative slack of 1e-9 so that accumulated
    /// floating point error in t cannot postpone a due application by a
    /// whole step.
    pub fn decide(
        &self,
        state: &DiagonalState,
        model: &MeasurementModel,
        t: f64,
        last_applied: f64,
    ) -> Result<Option<Permutation>> {
        match self {
            FeedbackPolicy::None => Ok(None),
            FeedbackPolicy::LOrder => l_order_permutation(state, model).map(Some),
            FeedbackPolicy::HOrder => h_order_permutation(state, model).map(Some),
            FeedbackPolicy::Periodic { interval, inner } => {
                if t - last_applied < (interval / model.strength()) * (1.0 - 1e-9) {
                    return Ok(None);
                }
                match inner {
                    OrderingKind::LOrder => l_order_permutation(state, model).map(Some),
                    OrderingKind::HOrder => h_order_permutation(state, model).map(Some),
                }
            }
        }
    }
}

/// Largest probability to position 0, then the remaining ranks wrap around
/// from the far end: position 1 gets the smallest, position 2 the next
/// smallest, and so on up to position d-1 which gets the second largest.
/// This splits the runners-up as far from position 0 as possible while
/// keeping the mean pinned near the top candidate.
pub fn l_order_permutation(state: &DiagonalState, model: &MeasurementModel) -> Result<Permutation> {
    if !model.is_qudit() {
        return Err(Error::ExpectedQudit);
    }
    state.check_dimension(model)?;
    let d = state.dimension();
    let ranks = state.rank_order();
    let mut mapping = vec![0usize; d];
    mapping[0] = ranks[0];
    for k in 1..d {
        mapping[k] = ranks[d - k];
    }
    Ok(Permutation { mapping })
}

/// Largest probability to the all-zeros string, second largest to the
/// all-ones string, then shells of increasing Hamming distance from the
/// all-ones string take the remaining ranks: within a shell, positions in
/// ascending integer order receive probabilities in descending rank.
pub fn h_order_permutation(state: &DiagonalState, model: &MeasurementModel) -> Result<Permutation> {
    let n = match model.qubits() {
        Some(n) => n,
        None => return Err(Error::ExpectedRegister),
    };
    state.check_dimension(model)?;
    let dim = state.dimension();
    let ones = dim - 1;

    let mut fill = Vec::with_capacity(dim);
    fill.push(0);
    fill.push(ones);
    for k in 1..n {
        for pos in 1..ones {
            if hamming_distance(pos, ones) as usize == k {
                fill.push(pos);
            }
        }
    }
    debug_assert_eq!(fill.len(), dim);

    let ranks = state.rank_order();
    let mut mapping = vec![0usize; dim];
    for (j, &pos) in fill.iter().enumerate() {
        mapping[pos] = ranks[j];
    }
    Ok(Permutation { mapping })
}

/// Number of bit positions where the two basis labels differ.
pub fn hamming_distance(a: usize, b: usize) -> u32 {
    (a ^ b).count_ones()
}

/// Squared separation between the most likely outcome and the mean: for a
/// qudit (x_p - <X>)^2 with p the max position, for a register
/// sum_r (z_r(p) - <Z_r>)^2. This is the arrangement-dependent factor in the
/// expected log-infidelity rate, so maximizing it is locally optimal. A pure
/// state gives 0 since its mean sits exactly on the max outcome.
pub fn lo_objective(state: &DiagonalState, model: &MeasurementModel) -> Result<f64> {
    state.check_dimension(model)?;
    Ok(objective_for_mapping(state.probs(), None, model))
}

/// Exhaustive maximum of the objective over all arrangements of the state's
/// probabilities, with the permutation that attains it (first found under
/// strict improvement). Factorial cost limits it to d <= 6 and n <= 3.
pub fn brute_force_best_objective(
    state: &DiagonalState,
    model: &MeasurementModel,
) -> Result<(f64, Permutation)> {
    state.check_dimension(model)?;
    let dim = state.dimension();
    let too_big = match model.qubits() {
        Some(n) => n > 3,
        None => dim > 6,
    };
    if too_big {
        return Err(Error::BruteForceTooLarge { dim });
    }

    let probs = state.probs();
    let mut idx: Vec<usize> = (0..dim).collect();
    let mut best = objective_for_mapping(probs, Some(&idx), model);
    let mut best_idx = idx.clone();

    // Heap's algorithm: every permutation visited exactly once via swaps.
    let mut c = vec![0usize; dim];
    let mut i = 1;
    while i < dim {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            let obj = objective_for_mapping(probs, Some(&idx), model);
            if obj > best {
                best = obj;
                best_idx = idx.clone();
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best, Permutation { mapping: best_idx }))
}

/// Hill-climbs from `start` by pairwise swaps, keeping any swap that strictly
/// improves the objective, until a full sweep finds none. Off by default in
/// the policies; useful for checking that an ordering sits at a local
/// maximum.
pub fn greedy_swap_refinement(
    state: &DiagonalState,
    model: &MeasurementModel,
    start: &Permutation,
) -> Result<Permutation> {
    if start.mapping.len() != state.dimension() {
        return Err(Error::DimensionMismatch {
            state: state.dimension(),
            model: start.mapping.len(),
        });
    }
    state.check_dimension(model)?;
    let probs = state.probs();
    let mut mapping = start.mapping.clone();
    let mut current = objective_for_mapping(probs, Some(&mapping), model);
    loop {
        let mut improved = false;
        for i in 0..mapping.len() {
            for j in i + 1..mapping.len() {
                mapping.swap(i, j);
                let obj = objective_for_mapping(probs, Some(&mapping), model);
                if obj > current {
                    current = obj;
                    improved = true;
                } else {
                    mapping.swap(i, j);
                }
            }
        }
        if !improved {
            return Ok(Permutation { mapping });
        }
    }
}

/// Objective of the arrangement `values[mapping[k]] at position k`, or of
/// `values` as laid out when `mapping` is None. The max position follows the
/// same first-index tie-break as DiagonalState::max_position.
fn objective_for_mapping(values: &[f64], mapping: Option<&[usize]>, model: &MeasurementModel) -> f64 {
    let dim = values.len();
    let at = |k: usize| match mapping {
        Some(m) => values[m[k]],
        None => values[k],
    };
    let mut p = 0;
    let mut max = at(0);
    for k in 1..dim {
        let v = at(k);
        if v > max {
            max = v;
            p = k;
        }
    }
    match model.qubits() {
        None => {
            let mut mean = 0.0;
            for k in 0..dim {
                mean += k as f64 * at(k);
            }
            let sep = p as f64 - mean;
            sep * sep
        }
        Some(n) => {
            let mut total = 0.0;
            for r in 0..n {
                // z values are 0 for a clear bit and -2 for a set bit
                let mut mean_z = 0.0;
                for alpha in 0..dim {
                    if crate::state::bit_from_left(alpha, r, n) {
                        mean_z -= 2.0 * at(alpha);
                    }
                }
                let zp = if crate::state::bit_from_left(p, r, n) { -2.0 } else { 0.0 };
                let sep = zp - mean_z;
                total += sep * sep;
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qudit(d: usize) -> MeasurementModel {
        MeasurementModel::qudit(d, 1.0).unwrap()
    }

    fn register(n: usize) -> MeasurementModel {
        MeasurementModel::register(n, 1.0).unwrap()
    }

    fn state(probs: &[f64]) -> DiagonalState {
        DiagonalState::from_probs(probs.to_vec()).unwrap()
    }

    // xorshift64* is plenty for generating test states
    struct Rng(u64);
    impl Rng {
        fn next(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    /// Random state with a dominant entry at a random position.
    fn dominant_state(rng: &mut Rng, dim: usize) -> DiagonalState {
        let top = 0.5 + 0.49 * rng.next();
        let mut rest: Vec<f64> = (0..dim - 1).map(|_| rng.next()).collect();
        let norm: f64 = rest.iter().sum();
        for v in &mut rest {
            *v *= (1.0 - top) / norm;
        }
        let slot = (rng.next() * dim as f64) as usize % dim;
        rest.insert(slot, top);
        DiagonalState::from_probs(rest).unwrap()
    }

    #[test]
    fn l_ordering_wraps_the_runners_up_around_the_far_end() {
        let model = qudit(4);
        let mut s = state(&[0.7, 0.15, 0.1, 0.05]);
        let p = l_order_permutation(&s, &model).unwrap();
        p.apply(&mut s).unwrap();
        assert_eq!(s.probs(), &[0.7, 0.05, 0.1, 0.15]);
    }

    #[test]
    fn l_ordering_hoists_the_max_to_position_zero() {
        let model = qudit(3);
        let mut s = state(&[0.2, 0.5, 0.3]);
        let p = l_order_permutation(&s, &model).unwrap();
        p.apply(&mut s).unwrap();
        assert_eq!(s.probs(), &[0.5, 0.2, 0.3]);
    }

    #[test]
    fn l_ordering_on_uniform_state_changes_nothing() {
        let model = qudit(5);
        let mut s = DiagonalState::completely_mixed(&model);
        let before = s.probs().to_vec();
        let obj_before = lo_objective(&s, &model).unwrap();
        l_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
        assert_eq!(s.probs(), &before[..]);
        assert_eq!(lo_objective(&s, &model).unwrap(), obj_before);
    }

    #[test]
    fn h_ordering_fills_distance_shells_around_the_ones_string() {
        let model = register(2);
        let mut s = state(&[0.7, 0.15, 0.1, 0.05]);
        h_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
        // 00 <- 0.7, 11 <- 0.15, then shell at distance 1 from 11: 01, 10
        assert_eq!(s.probs(), &[0.7, 0.1, 0.05, 0.15]);

        let model = register(3);
        let ranked: Vec<f64> = vec![0.5, 0.2, 0.1, 0.08, 0.05, 0.04, 0.02, 0.01];
        let mut s = state(&ranked);
        h_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
        // fill order 000, 111, 011, 101, 110, 001, 010, 100
        let fill = [0usize, 7, 3, 5, 6, 1, 2, 4];
        let mut expected = [0.0; 8];
        for (j, &pos) in fill.iter().enumerate() {
            expected[pos] = ranked[j];
        }
        assert_eq!(s.probs(), &expected[..]);
    }

    #[test]
    fn h_ordering_on_one_qubit_is_rank_order() {
        let model = register(1);
        let mut s = state(&[0.3, 0.7]);
        h_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
        assert_eq!(s.probs(), &[0.7, 0.3]);
    }

    #[test]
    fn hamming_distance_counts_differing_bits() {
        assert_eq!(hamming_distance(0b101, 0b000), 2);
        assert_eq!(hamming_distance(0b11, 0b00), 2);
        assert_eq!(hamming_distance(9, 9), 0);
    }

    #[test]
    fn objective_matches_hand_arithmetic() {
        let model = qudit(3);
        let s = state(&[0.5, 0.2, 0.3]);
        // <X> = 0.8, max at 0
        assert!((lo_objective(&s, &model).unwrap() - 0.64).abs() < 1e-15);

        let model = register(2);
        let s = state(&[0.7, 0.1, 0.05, 0.15]);
        // <Z_0> = -0.4, <Z_1> = -0.5, max at 00
        assert!((lo_objective(&s, &model).unwrap() - 0.41).abs() < 1e-15);
    }

    #[test]
    fn objective_vanishes_on_pure_states() {
        let model = qudit(4);
        let s = state(&[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(lo_objective(&s, &model).unwrap(), 0.0);
        let model = register(2);
        let s = state(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(lo_objective(&s, &model).unwrap(), 0.0);
    }

    #[test]
    fn orderings_are_idempotent() {
        let mut rng = Rng(41);
        for d in 3..=6 {
            let model = qudit(d);
            let mut s = dominant_state(&mut rng, d);
            l_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
            let again = l_order_permutation(&s, &model).unwrap();
            assert!(again.is_identity(), "d={d}: {:?}", again.mapping());
        }
        for n in 1..=3 {
            let model = register(n);
            let mut s = dominant_state(&mut rng, 1 << n);
            h_order_permutation(&s, &model).unwrap().apply(&mut s).unwrap();
            let again = h_order_permutation(&s, &model).unwrap();
            assert!(again.is_identity(), "n={n}: {:?}", again.mapping());
        }
    }

    #[test]
    fn permutations_preserve_the_probability_multiset() {
        let mut rng = Rng(7);
        let model = qudit(5);
        let s = dominant_state(&mut rng, 5);
        let mut sorted_before = s.probs().to_vec();
        sorted_before.sort_by(f64::total_cmp);
        let mut t = s.clone();
        l_order_permutation(&s, &model).unwrap().apply(&mut t).unwrap();
        let mut sorted_after = t.probs().to_vec();
        sorted_after.sort_by(f64::total_cmp);
        assert_eq!(sorted_before, sorted_after);
    }

    #[test]
    fn brute_force_agrees_with_hand_enumeration() {
        let model = qudit(3);
        let s = state(&[0.5, 0.3, 0.2]);
        let (best, perm) = brute_force_best_objective(&s, &model).unwrap();
        assert!((best - 0.64).abs() < 1e-15);
        let mut t = s.clone();
        perm.apply(&mut t).unwrap();
        // two arrangements tie at the max; the enumeration settles on one
        assert!(t.probs() == [0.5, 0.2, 0.3] || t.probs() == [0.3, 0.2, 0.5]);
    }

    #[test]
    fn brute_force_ties_on_uniform_states() {
        let model = qudit(4);
        let s = DiagonalState::completely_mixed(&model);
        let (best, _) = brute_force_best_objective(&s, &model).unwrap();
        assert!((best - lo_objective(&s, &model).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn brute_force_rejects_oversized_systems() {
        let model = qudit(7);
        let s = DiagonalState::completely_mixed(&model);
        assert_eq!(
            brute_force_best_objective(&s, &model).unwrap_err(),
            Error::BruteForceTooLarge { dim: 7 }
        );
    }

    #[test]
    fn l_ordering_attains_the_brute_force_maximum() {
        let mut rng = Rng(2024);
        for d in 3..=6 {
            let model = qudit(d);
            for _ in 0..50 {
                let s = dominant_state(&mut rng, d);
                let mut t = s.clone();
                l_order_permutation(&s, &model).unwrap().apply(&mut t).unwrap();
                let ordered = lo_objective(&t, &model).unwrap();
                let (best, _) = brute_force_best_objective(&s, &model).unwrap();
                assert!(
                    (ordered - best).abs() <= 1e-12 * best,
                    "d={d}: ordered {ordered} vs brute {best}"
                );
            }
        }
    }

    #[test]
    fn h_ordering_attains_the_brute_force_maximum() {
        let mut rng = Rng(515);
        for n in 2..=3 {
            let model = register(n);
            for _ in 0..30 {
                let s = dominant_state(&mut rng, 1 << n);
                let mut t = s.clone();
                h_order_permutation(&s, &model).unwrap().apply(&mut t).unwrap();
                let ordered = lo_objective(&t, &model).unwrap();
                let (best, _) = brute_force_best_objective(&s, &model).unwrap();
                assert!(
                    (ordered - best).abs() <= 1e-12 * best,
                    "n={n}: ordered {ordered} vs brute {best}"
                );
            }
        }
    }

    #[test]
    fn greedy_refinement_never_decreases_the_objective() {
        let mut rng = Rng(88);
        let model = register(3);
        for _ in 0..20 {
            let s = dominant_state(&mut rng, 8);
            let start = Permutation::identity(8);
            let refined = greedy_swap_refinement(&s, &model, &start).unwrap();
            let mut t = s.clone();
            refined.apply(&mut t).unwrap();
            let before = lo_objective(&s, &model).unwrap();
            let after = lo_objective(&t, &model).unwrap();
            assert!(after >= before);
        }
    }

    #[test]
    fn greedy_refinement_reaches_the_optimum_from_identity_at_d3() {
        let model = qudit(3);
        let s = state(&[0.2, 0.5, 0.3]);
        let refined = greedy_swap_refinement(&s, &model, &Permutation::identity(3)).unwrap();
        let mut t = s.clone();
        refined.apply(&mut t).unwrap();
        assert!((lo_objective(&t, &model).unwrap() - 0.64).abs() < 1e-15);
    }

    #[test]
    fn periodic_policy_fires_only_after_the_interval() {
        let model = qudit(3);
        let s = state(&[0.2, 0.5, 0.3]);
        let policy = FeedbackPolicy::Periodic { interval: 0.2, inner: OrderingKind::LOrder };
        assert!(policy.decide(&s, &model, 0.19, 0.0).unwrap().is_none());
        let fired = policy.decide(&s, &model, 0.2, 0.0).unwrap().unwrap();
        let mut t = s.clone();
        fired.apply(&mut t).unwrap();
        assert_eq!(t.probs(), &[0.5, 0.2, 0.3]);
        // interval is measured in units of 1/strength
        let fast = MeasurementModel::qudit(3, 2.0).unwrap();
        assert!(policy.decide(&s, &fast, 0.09, 0.0).unwrap().is_none());
        assert!(policy.decide(&s, &fast, 0.1, 0.0).unwrap().is_some());
    }

    #[test]
    fn policies_reject_mismatched_models() {
        let q = qudit(3);
        let r = register(2);
        assert_eq!(FeedbackPolicy::HOrder.validate_for(&q).unwrap_err(), Error::ExpectedRegister);
        assert_eq!(FeedbackPolicy::LOrder.validate_for(&r).unwrap_err(), Error::ExpectedQudit);
        let p = FeedbackPolicy::Periodic { interval: 0.2, inner: OrderingKind::HOrder };
        assert_eq!(p.validate_for(&q).unwrap_err(), Error::ExpectedRegister);
        let bad = FeedbackPolicy::Periodic { interval: 0.0, inner: OrderingKind::LOrder };
        assert!(matches!(bad.validate_for(&q).unwrap_err(), Error::NonPositive { .. }));
    }

    #[test]
    fn mappings_must_be_bijections() {
        assert_eq!(Permutation::from_mapping(vec![0, 0, 1]).unwrap_err(), Error::NotABijection);
        assert_eq!(Permutation::from_mapping(vec![0, 3]).unwrap_err(), Error::NotABijection);
        assert!(Permutation::from_mapping(vec![2, 0, 1]).is_ok());
    }
}
