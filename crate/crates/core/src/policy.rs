//! Multiplier-conditioned policies.
//!
//! A policy maps an agent's own position, its own multiplier copy and its id
//! to a move. It never sees other agents' states.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::env::{Coord, GridSpec, Move, ZoneSpec};

/// User-supplied policy: `(position, λ, agent_id) -> move`.
pub type ExternalFn = dyn Fn(Coord, &[f64], usize) -> Move + Send + Sync;

#[derive(Clone)]
pub enum PolicyParams {
    /// Station at the zone assigned by [`rank_assignment`].
    LagrangianGreedy,
    /// Uniformly random move; a baseline.
    Uniform,
    External(Arc<ExternalFn>),
}

impl PolicyParams {
    pub fn external(f: impl Fn(Coord, &[f64], usize) -> Move + Send + Sync + 'static) -> Self {
        PolicyParams::External(Arc::new(f))
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyParams::LagrangianGreedy => "lagrangian_greedy",
            PolicyParams::Uniform => "uniform",
            PolicyParams::External(_) => "external",
        }
    }
}

impl fmt::Debug for PolicyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Zone indices ordered by `λ` descending, then index ascending.
pub fn zone_ranking(lambda: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b)));
    order
}

/// Zone index (0-based) targeted by agent `agent` (0-based).
///
/// Agent `n` takes the zone of rank `n mod min(N, M)`. Agents holding
/// identical multipliers therefore cover the top `min(N, M)` zones without
/// collisions.
pub fn rank_assignment(lambda: &[f64], agent: usize, n_zones: usize, n_agents: usize) -> usize {
    assert!(n_zones > 0 && n_agents > 0);
    let rank = agent % n_agents.min(n_zones);
    zone_ranking(&lambda[..n_zones])[rank]
}

/// One step toward `goal`: reduce the larger axis gap first, `x` on ties.
pub fn step_toward(from: Coord, goal: Coord) -> Move {
    let dx = from.x.abs_diff(goal.x);
    let dy = from.y.abs_diff(goal.y);
    if dx == 0 && dy == 0 {
        Move::Stay
    } else if dx >= dy {
        if goal.x > from.x {
            Move::Right
        } else {
            Move::Left
        }
    } else if goal.y > from.y {
        Move::Up
    } else {
        Move::Down
    }
}

/// Nearest cell of `zone` by Manhattan distance; lowest `(x, y)` on ties.
pub fn nearest_cell(from: Coord, zone: &ZoneSpec) -> Coord {
    *zone
        .cells()
        .iter()
        .min_by_key(|c| (from.manhattan(**c), **c))
        .expect("zones are non-empty")
}

/// Static context shared by every agent's policy call.
#[derive(Clone, Copy, Debug)]
pub struct PolicyContext<'a> {
    pub grid: &'a GridSpec,
    pub zones: &'a [ZoneSpec],
    pub n_agents: usize,
}

pub fn act<R: Rng + ?Sized>(
    position: Coord,
    lambda: &[f64],
    agent: usize,
    params: &PolicyParams,
    ctx: &PolicyContext<'_>,
    rng: &mut R,
) -> Move {
    match params {
        PolicyParams::LagrangianGreedy => {
            let zone = &ctx.zones[rank_assignment(lambda, agent, ctx.zones.len(), ctx.n_agents)];
            if zone.contains(position) {
                Move::Stay
            } else {
                step_toward(position, nearest_cell(position, zone))
            }
        }
        PolicyParams::Uniform => Move::ALL[rng.gen_range(0..Move::ALL.len())],
        PolicyParams::External(f) => f(position, lambda, agent),
    }
}

/// `Σ_m λ_m (V_m - c_m)`.
pub fn lagrangian_value(lambda: &[f64], occupied: &[bool], thresholds: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(occupied)
        .zip(thresholds)
        .map(|((&l, &v), &c)| l * (f64::from(u8::from(v)) - c))
        .sum()
}

/// Zones covered when every agent is stationed at its [`rank_assignment`] zone.
pub fn greedy_stationing(lambda: &[f64], n_agents: usize) -> Vec<bool> {
    let m = lambda.len();
    let mut v = vec![false; m];
    for agent in 0..n_agents {
        v[rank_assignment(lambda, agent, m, n_agents)] = true;
    }
    v
}

/// Feasibility margin `(1 - c_max) / √M`.
pub fn feasibility_margin(thresholds: &[f64]) -> f64 {
    let c_max = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1.0 - c_max) / (thresholds.len() as f64).sqrt()
}
