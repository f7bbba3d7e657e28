//! Projected stochastic dual descent on the zone multipliers.
//!
//! Each agent keeps two copies of its multipliers. The delayed copy is
//! updated with the previous rollout's reward counts, which have been
//! finalized by gossip and are therefore identical at every agent; it
//! reproduces the centralized recursion exactly. The fresh copy adds the
//! current rollout's still-settling estimates on top and is what the policy
//! consumes.
//!
//! Gradients are always formed as `count / T0 - c` from an integer count of
//! occupied ticks, so the delayed copy and the centralized reference agree
//! bit for bit whenever their counts agree.

use crate::error::{ConfigError, ContractViolation};
use crate::gossip::EstimateTable;

/// `[x]₊`, normalizing `-0.0` to `0.0`.
#[inline]
pub fn project(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Average constraint slack of one rollout for one zone.
#[inline]
pub fn slack(occupied_ticks: u64, t_zero: u64, threshold: f64) -> f64 {
    occupied_ticks as f64 / t_zero as f64 - threshold
}

#[inline]
fn descend(lambda: f64, eta: f64, gradient: f64) -> f64 {
    project(lambda - eta * gradient)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualGradient {
    /// Previous rollout, from consensus-final estimates.
    pub g_prev: Vec<f64>,
    /// Current rollout, from the freshest estimates.
    pub g_curr: Vec<f64>,
}

/// Gradients at the end of rollout `k`, i.e. at clock `(k + 1) * T0`.
///
/// For `k = 0` there is no previous rollout and `g_prev` is zero.
pub fn compute_gradients(
    table: &EstimateTable,
    thresholds: &[f64],
    rollout: u64,
    t_zero: u64,
) -> Result<DualGradient, ContractViolation> {
    let t = table.clock().unwrap_or(u64::MAX);
    if t_zero != table.t_zero() || t != (rollout + 1) * t_zero {
        return Err(ContractViolation::NotBoundary { t, t_zero });
    }
    let g_prev = if rollout == 0 {
        vec![0.0; thresholds.len()]
    } else {
        let prev = rollout - 1;
        let covered = table.finalized_counts(prev).is_some()
            || table.window_start().is_some_and(|s| s <= prev * t_zero);
        if !covered {
            return Err(ContractViolation::MissingRollout { rollout: prev });
        }
        table
            .rollout_counts(prev)
            .into_iter()
            .zip(thresholds)
            .map(|(n, &c)| slack(n, t_zero, c))
            .collect()
    };
    let g_curr = table
        .rollout_counts(rollout)
        .into_iter()
        .zip(thresholds)
        .map(|(n, &c)| slack(n, t_zero, c))
        .collect();
    Ok(DualGradient { g_prev, g_curr })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierState {
    agent: usize,
    lambda_prev: Vec<f64>,
    lambda_curr: Vec<f64>,
    eta: f64,
    t_zero: u64,
    rollout_index: u64,
}

impl MultiplierState {
    /// Zero-initialized multipliers. `retention` is the gossip horizon `d`,
    /// which must not exceed `t_zero` for the delayed copy to be exact.
    pub fn new(
        agent: usize,
        n_zones: usize,
        eta: f64,
        t_zero: u64,
        retention: usize,
    ) -> Result<Self, ConfigError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if t_zero == 0 {
            return Err(ConfigError::Invalid("t_zero must be at least 1".into()));
        }
        if (retention as u64) > t_zero {
            return Err(ConfigError::Invalid(format!(
                "t_zero = {t_zero} is shorter than the gossip horizon d = {retention}"
            )));
        }
        Ok(MultiplierState {
            agent,
            lambda_prev: vec![0.0; n_zones],
            lambda_curr: vec![0.0; n_zones],
            eta,
            t_zero,
            rollout_index: 0,
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    /// Consensus-delayed copy, `λ^k` after the boundary closing rollout `k`.
    pub fn lambda_prev(&self) -> &[f64] {
        &self.lambda_prev
    }

    /// Fresh copy, `λ^{k+1}_n`; drives the policy.
    pub fn lambda_curr(&self) -> &[f64] {
        &self.lambda_curr
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t_zero(&self) -> u64 {
        self.t_zero
    }

    /// Number of updates applied so far.
    pub fn rollout_index(&self) -> u64 {
        self.rollout_index
    }

    /// Applies both steps of the two-copy update. `η` multiplies each
    /// gradient exactly once.
    pub fn apply_update(&mut self, grads: &DualGradient) {
        assert_eq!(grads.g_prev.len(), self.lambda_prev.len());
        assert_eq!(grads.g_curr.len(), self.lambda_curr.len());
        for (lp, &g) in self.lambda_prev.iter_mut().zip(&grads.g_prev) {
            *lp = descend(*lp, self.eta, g);
        }
        for ((lc, &lp), &g) in self
            .lambda_curr
            .iter_mut()
            .zip(&self.lambda_prev)
            .zip(&grads.g_curr)
        {
            *lc = descend(lp, self.eta, g);
        }
        self.rollout_index += 1;
    }
}

/// One step of the centralized recursion driven by true rewards.
/// `rewards[τ][m]` covers exactly one rollout of `t_zero` ticks.
pub fn centralized_update(
    lambda: &[f64],
    rewards: &[Vec<bool>],
    thresholds: &[f64],
    eta: f64,
    t_zero: u64,
) -> Vec<f64> {
    assert_eq!(
        rewards.len() as u64,
        t_zero,
        "one rollout of rewards is required"
    );
    lambda
        .iter()
        .zip(thresholds)
        .enumerate()
        .map(|(m, (&l, &c))| {
            let occupied = rewards.iter().filter(|r| r[m]).count() as u64;
            descend(l, eta, slack(occupied, t_zero, c))
        })
        .collect()
}

/// Per-zone deviation between the agents' fresh copies and the centralized
/// multipliers at the same boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    /// `max_n (λ_{m,n} - λ_m)`.
    pub agent_excess: Vec<f64>,
    /// `min_n (λ_{m,n} - λ_m)`; non-negative because gossip underestimates.
    pub agent_excess_min: Vec<f64>,
    /// `max_n (λ_m - λ_{m,n})`.
    pub central_excess: Vec<f64>,
}

impl Mismatch {
    pub fn max_deviation(&self) -> f64 {
        self.agent_excess
            .iter()
            .chain(&self.central_excess)
            .fold(0.0, |a, &b| a.max(b))
    }

    /// Whether every agent sits in `[λ_m, λ_m + bound]` for every zone.
    pub fn within(&self, bound: f64) -> bool {
        self.agent_excess_min.iter().all(|&v| v >= 0.0)
            && self.agent_excess.iter().all(|&v| v <= bound)
    }
}

pub fn mismatch<'a>(
    lambda_central: &[f64],
    agents: impl IntoIterator<Item = &'a [f64]>,
) -> Mismatch {
    let m = lambda_central.len();
    let mut out = Mismatch {
        agent_excess: vec![f64::NEG_INFINITY; m],
        agent_excess_min: vec![f64::INFINITY; m],
        central_excess: vec![f64::NEG_INFINITY; m],
    };
    let mut any = false;
    for lambda in agents {
        any = true;
        for z in 0..m {
            let diff = lambda[z] - lambda_central[z];
            out.agent_excess[z] = out.agent_excess[z].max(diff);
            out.agent_excess_min[z] = out.agent_excess_min[z].min(diff);
            out.central_excess[z] = out.central_excess[z].max(-diff);
        }
    }
    if !any {
        out = Mismatch {
            agent_excess: vec![0.0; m],
            agent_excess_min: vec![0.0; m],
            central_excess: vec![0.0; m],
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(m: usize, eta: f64) -> MultiplierState {
        MultiplierState::new(0, m, eta, 4, 1).unwrap()
    }

    #[test]
    fn starved_zone_gradient() {
        let mut table = EstimateTable::new(0, 1, 1, 4);
        for t in 0..=8 {
            table.init_slot_with(t, vec![false]).unwrap();
        }
        let g = compute_gradients(&table, &[0.5], 1, 4).unwrap();
        assert_eq!(g.g_prev, vec![-0.5]);
        assert_eq!(g.g_curr, vec![-0.5]);
    }

    #[test]
    fn saturated_zone_gradient() {
        let mut table = EstimateTable::new(0, 1, 1, 4);
        for t in 0..=8 {
            table.init_slot_with(t, vec![true]).unwrap();
        }
        let g = compute_gradients(&table, &[0.5], 1, 4).unwrap();
        assert_eq!(g.g_prev, vec![0.5]);
    }

    #[test]
    fn gradient_by_substitution() {
        let mut table = EstimateTable::new(0, 1, 2, 4);
        let pattern = [true, false, true, false, false, false, false, false, false];
        for (t, &v) in pattern.iter().enumerate() {
            table.init_slot_with(t as u64, vec![v]).unwrap();
        }
        let g = compute_gradients(&table, &[0.25], 1, 4).unwrap();
        assert_eq!(g.g_prev, vec![0.25]);
        assert_eq!(g.g_curr, vec![-0.25]);
    }

    #[test]
    fn first_rollout_has_no_previous_gradient() {
        let mut table = EstimateTable::new(0, 2, 1, 4);
        for t in 0..=4 {
            table.init_slot_with(t, vec![true, false]).unwrap();
        }
        let g = compute_gradients(&table, &[0.5, 0.5], 0, 4).unwrap();
        assert_eq!(g.g_prev, vec![0.0, 0.0]);
        assert_eq!(g.g_curr, vec![0.5, -0.5]);
    }

    #[test]
    fn off_boundary_is_a_contract_violation() {
        let mut table = EstimateTable::new(0, 1, 1, 4);
        for t in 0..=5 {
            table.init_slot_with(t, vec![true]).unwrap();
        }
        assert_eq!(
            compute_gradients(&table, &[0.5], 1, 4),
            Err(ContractViolation::NotBoundary { t: 5, t_zero: 4 })
        );
    }

    #[test]
    fn discarded_rollout_is_reported_missing() {
        let mut table = EstimateTable::new(0, 1, 1, 4);
        for t in 0..=8 {
            table.init_slot_with(t, vec![true]).unwrap();
        }
        table.discard_before(1);
        assert_eq!(
            compute_gradients(&table, &[0.5], 1, 4),
            Err(ContractViolation::MissingRollout { rollout: 0 })
        );
    }

    #[test]
    fn starved_zone_raises_multiplier() {
        let mut s = state(1, 0.1);
        s.apply_update(&DualGradient {
            g_prev: vec![-0.5],
            g_curr: vec![-0.5],
        });
        assert_eq!(s.lambda_prev(), &[0.05]);
        assert_eq!(s.lambda_curr(), &[0.1]);
        assert_eq!(s.rollout_index(), 1);
    }

    #[test]
    fn projection_clamps_at_zero() {
        let mut s = state(1, 0.1);
        s.lambda_prev = vec![0.02];
        s.apply_update(&DualGradient {
            g_prev: vec![1.0],
            g_curr: vec![1.0],
        });
        assert_eq!(s.lambda_prev(), &[0.0]);
        assert_eq!(s.lambda_curr(), &[0.0]);
        assert!(s.lambda_prev()[0].is_sign_positive());
    }

    #[test]
    fn invalid_construction() {
        assert!(MultiplierState::new(0, 1, -0.1, 4, 1).is_err());
        assert!(MultiplierState::new(0, 1, 0.0, 4, 1).is_err());
        assert!(MultiplierState::new(0, 1, 0.1, 2, 3).is_err());
        assert!(MultiplierState::new(0, 1, 0.1, 0, 0).is_err());
    }

    #[test]
    fn zero_gradient_keeps_lambda() {
        let rewards = vec![vec![true], vec![false], vec![true], vec![false]];
        assert_eq!(
            centralized_update(&[0.7], &rewards, &[0.5], 0.3, 4),
            vec![0.7]
        );
    }

    #[test]
    fn centralized_by_substitution() {
        let rewards = vec![vec![true]; 5];
        let out = centralized_update(&[1.0], &rewards, &[0.5], 0.2, 5);
        assert!((out[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_copy_chain_tracks_centralized_recursion() {
        // Rollout 0 has counts (3 of 4) and rollout 1 has (1 of 4); c = 0.5.
        let r0 = vec![vec![true], vec![true], vec![true], vec![false]];
        let r1 = vec![vec![false], vec![true], vec![false], vec![false]];
        let eta = 0.5;
        let l1 = centralized_update(&[0.0], &r0, &[0.5], eta, 4);
        let l2 = centralized_update(&l1, &r1, &[0.5], eta, 4);
        // Hand-unrolled: λ¹ = [0 - 0.5 * 0.25]₊ = 0, λ² = [0 - 0.5 * (-0.25)]₊ = 0.125.
        assert_eq!(l1, vec![0.0]);
        assert_eq!(l2, vec![0.125]);

        let mut s = MultiplierState::new(0, 1, eta, 4, 1).unwrap();
        s.apply_update(&DualGradient {
            g_prev: vec![0.0],
            g_curr: vec![slack(3, 4, 0.5)],
        });
        assert_eq!(s.lambda_prev(), &[0.0]);
        assert_eq!(s.lambda_curr(), l1.as_slice());
        s.apply_update(&DualGradient {
            g_prev: vec![slack(3, 4, 0.5)],
            g_curr: vec![slack(1, 4, 0.5)],
        });
        assert_eq!(s.lambda_prev(), l1.as_slice());
        assert_eq!(s.lambda_curr(), l2.as_slice());
    }

    #[test]
    fn single_agent_has_no_mismatch() {
        let m = mismatch(&[0.3, 0.0], [&[0.3, 0.0][..]]);
        assert_eq!(m.max_deviation(), 0.0);
        assert!(m.within(0.0));
    }

    #[test]
    fn mismatch_orientation() {
        let m = mismatch(&[0.3], [&[0.31][..], &[0.3][..]]);
        assert!((m.agent_excess[0] - 0.01).abs() < 1e-12);
        assert_eq!(m.agent_excess_min, vec![0.0]);
        assert!(m.within(0.02));
        assert!(!m.within(0.005));
        let below = mismatch(&[0.3], [&[0.29][..]]);
        assert!(!below.within(1.0));
    }

    proptest! {
        #[test]
        fn projection_is_non_expansive(a in prop::collection::vec(-5.0f64..5.0, 1..8), shift in prop::collection::vec(-5.0f64..5.0, 8)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let lhs: f64 = a.iter().zip(&b).map(|(x, y)| (project(*x) - project(*y)).powi(2)).sum::<f64>().sqrt();
            let rhs: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn multipliers_stay_nonnegative(gs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50), eta in 0.001f64..2.0) {
            let mut s = MultiplierState::new(0, 1, eta, 10, 1).unwrap();
            for (a, b) in gs {
                s.apply_update(&DualGradient { g_prev: vec![a], g_curr: vec![b] });
                prop_assert!(s.lambda_prev()[0] >= 0.0);
                prop_assert!(s.lambda_curr()[0] >= 0.0);
            }
        }
    }
}
