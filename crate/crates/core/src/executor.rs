//! End-to-end distributed execution.
//!
//! Each tick `t` runs these phases in order, with a barrier between them:
//!
//! 1. every agent opens its gossip slot for `τ = t` from its own position;
//! 2. one synchronous gossip round over the links usable at `t`;
//! 3. at a rollout boundary (`t = (k + 1) T0`), every agent computes its
//!    gradients and updates both multiplier copies;
//! 4. every agent picks a move from its fresh multiplier copy;
//! 5. the environment steps.
//!
//! The run stops after phase 3 of tick `K * T0`, so rewards are averaged
//! over the `K * T0` states `S_0 .. S_{K T0 - 1}`. A centralized reference
//! runs alongside on the true rewards for the diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{window_stats, Diagnostics, MismatchRecord};
use crate::dual::{centralized_update, compute_gradients, mismatch, slack, MultiplierState};
use crate::env::{occupancy, Coord, GridSpec, Move, WorldState, ZoneSpec};
use crate::error::{ConfigError, Error};
use crate::gossip::{encode_message, gossip_round, EstimateTable, GossipMessage};
use crate::graph::{sample_links, LinkModel, Topology};
use crate::policy::{act, feasibility_margin, PolicyContext, PolicyParams};

/// Slack on `Σ c_m <= N - 1` for thresholds that do not sum exactly in binary.
const THRESHOLD_SUM_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub zones: Vec<ZoneSpec>,
    /// Initial position of each agent; its length is `N`.
    pub starts: Vec<Coord>,
    pub topology: Topology,
    pub links: LinkModel,
    pub policy: PolicyParams,
    pub eta: f64,
    pub t_zero: u64,
    /// Gossip horizon `d`, an overestimate of the graph diameter.
    pub retention: usize,
    pub rollouts: u64,
    pub seed: u64,
    /// Policy representation error estimate.
    pub beta: f64,
    /// Finite-horizon consistency error estimate.
    pub epsilon: f64,
}

impl RunConfig {
    pub fn n_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.zones.iter().map(ZoneSpec::threshold).collect()
    }

    pub fn horizon(&self) -> u64 {
        self.rollouts * self.t_zero
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.zones.is_empty() {
            return bad("at least one zone is required".into());
        }
        let mut ids: Vec<u32> = self.zones.iter().map(ZoneSpec::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("zone ids must be unique".into());
        }
        for z in &self.zones {
            if let Some(c) = z.cells().iter().find(|c| !self.grid.contains(**c)) {
                return bad(format!("zone {}: cell {c} lies outside the grid", z.id()));
            }
        }
        if self.starts.len() != self.topology.n_agents() {
            return bad(format!(
                "{} start positions for a graph of {} agents",
                self.starts.len(),
                self.topology.n_agents()
            ));
        }
        if let Some((n, c)) = self
            .starts
            .iter()
            .enumerate()
            .find(|(_, c)| !self.grid.contains(**c))
        {
            return bad(format!("agent {n} starts at {c}, outside the grid"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.rollouts == 0 {
            return bad("rollouts must be at least 1".into());
        }
        let diameter = self.topology.diameter();
        if self.retention < diameter {
            return bad(format!(
                "d = {} is below the graph diameter {diameter}",
                self.retention
            ));
        }
        if (self.retention as u64) > self.t_zero {
            return bad(format!(
                "t_zero = {} must be at least d = {}",
                self.t_zero, self.retention
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite())
            || !(self.epsilon >= 0.0 && self.epsilon.is_finite())
        {
            return bad("beta and epsilon must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// The sufficient condition for almost-sure feasibility, evaluated on a config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremConditions {
    pub n_agents: usize,
    pub n_zones: usize,
    pub diameter: usize,
    pub c_max: f64,
    pub threshold_sum: f64,
    /// `(1 - c_max) / √M`.
    pub delta_c: f64,
    /// `β + (M / T0) d(G) η + ε + η / 2`.
    pub lhs: f64,
    pub satisfied: bool,
    /// `c_max < 1` and `Σ c_m <= N - 1`.
    pub spec_ok: bool,
}

pub fn check_conditions(config: &RunConfig) -> Result<TheoremConditions, ConfigError> {
    let thresholds = config.thresholds();
    let c_max = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta_c = feasibility_margin(&thresholds);
    if delta_c.is_nan() || delta_c <= 0.0 {
        return Err(ConfigError::NonPositiveMargin { c_max });
    }
    let n_zones = thresholds.len();
    let n_agents = config.n_agents();
    let diameter = config.topology.diameter();
    let lhs = config.beta
        + (n_zones as f64 / config.t_zero as f64) * diameter as f64 * config.eta
        + config.epsilon
        + config.eta / 2.0;
    let threshold_sum: f64 = thresholds.iter().sum();
    Ok(TheoremConditions {
        n_agents,
        n_zones,
        diameter,
        c_max,
        threshold_sum,
        delta_c,
        lhs,
        satisfied: lhs < delta_c,
        spec_ok: c_max < 1.0 && threshold_sum <= (n_agents as f64 - 1.0) + THRESHOLD_SUM_SLACK,
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Keep per-tick positions, actions and rewards.
    pub record_trajectory: bool,
    /// Keep every agent's outgoing gossip message.
    pub trace_messages: bool,
}

/// State of every agent at tick `t`, the joint action taken, and the true
/// zone occupancy of `S_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub t: u64,
    pub positions: Vec<Coord>,
    pub actions: Vec<Move>,
    pub rewards: Vec<bool>,
}

/// One agent's multiplier update at the boundary closing rollout `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierRecord {
    pub rollout: u64,
    pub agent: usize,
    pub zone_id: u32,
    pub lambda_prev: f64,
    pub lambda_curr: f64,
    pub g_prev: f64,
    pub g_curr: f64,
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub conditions: TheoremConditions,
    pub trajectory: Vec<TickRecord>,
    pub multipliers: Vec<MultiplierRecord>,
    /// Centralized multipliers `λ^0 ..= λ^K`.
    pub central_lambda: Vec<Vec<f64>>,
    /// `(t, message)` for every agent at every tick, when traced.
    pub messages: Vec<(u64, GossipMessage)>,
    pub diagnostics: Diagnostics,
}

/// Every agent's move, each computed only from its own position and its
/// own fresh multiplier copy.
pub fn joint_action(
    state: &WorldState,
    multipliers: &[MultiplierState],
    params: &PolicyParams,
    ctx: &PolicyContext<'_>,
    rngs: &mut [ChaCha8Rng],
) -> Vec<Move> {
    state
        .positions
        .iter()
        .zip(multipliers)
        .zip(rngs.iter_mut())
        .enumerate()
        .map(|(n, ((&pos, mult), rng))| act(pos, mult.lambda_curr(), n, params, ctx, rng))
        .collect()
}

const ENV_STREAM: u64 = 0;
const LINK_STREAM: u64 = 1;
const POLICY_STREAM_BASE: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunArtifacts, Error> {
    config.validate()?;
    let conditions = check_conditions(config)?;

    let n = config.n_agents();
    let m = config.n_zones();
    let t_zero = config.t_zero;
    let horizon = config.horizon();
    let thresholds = config.thresholds();
    let d = config.retention;

    let mut env_rng = stream(config.seed, ENV_STREAM);
    let mut link_rng = stream(config.seed, LINK_STREAM);
    let mut policy_rngs: Vec<ChaCha8Rng> = (0..n as u64)
        .map(|a| stream(config.seed, POLICY_STREAM_BASE + a))
        .collect();

    let mut tables: Vec<EstimateTable> = (0..n)
        .map(|a| EstimateTable::new(a, m, d, t_zero))
        .collect();
    let mut multipliers = (0..n)
        .map(|a| MultiplierState::new(a, m, config.eta, t_zero, d))
        .collect::<Result<Vec<_>, _>>()?;
    let ctx = PolicyContext {
        grid: &config.grid,
        zones: &config.zones,
        n_agents: n,
    };

    let mut central = vec![vec![0.0; m]];
    let mut history: Vec<Vec<bool>> = Vec::with_capacity(horizon as usize);
    let mut diag = Diagnostics {
        zone_ids: config.zones.iter().map(ZoneSpec::id).collect(),
        thresholds: thresholds.clone(),
        horizon,
        occupied_ticks: vec![0; m],
        lambda_sq: vec![0.0],
        ..Default::default()
    };
    let mut trajectory = Vec::new();
    let mut records = Vec::new();
    let mut messages = Vec::new();

    let mut state = WorldState::new(config.starts.clone());
    for t in 0..=horizon {
        let truth = occupancy(&state, &config.zones);

        for (table, &pos) in tables.iter_mut().zip(&state.positions) {
            table.init_slot(t, pos, &config.zones)?;
        }
        let links = sample_links(&config.topology, config.links, &mut link_rng);
        if options.trace_messages {
            messages.extend(tables.iter().map(|tb| (t, encode_message(tb))));
        }
        gossip_round(&mut tables, &links)?;

        // The slot for τ = t - d has just had its last exchange.
        if let Some(tau) = t.checked_sub(d as u64) {
            let expected = &history.get(tau as usize).unwrap_or(&truth);
            for table in &tables {
                let est = table.estimate(tau).expect("slot is in the window");
                diag.deadline_violations += est
                    .iter()
                    .zip(expected.iter())
                    .filter(|(a, b)| a != b)
                    .count() as u64;
            }
        }

        if t > 0 && t % t_zero == 0 {
            let k = t / t_zero - 1;
            let lo = (k * t_zero) as usize;
            let prev = central.last().expect("λ^0 is present").clone();
            let next = centralized_update(
                &prev,
                &history[lo..lo + t_zero as usize],
                &thresholds,
                config.eta,
                t_zero,
            );

            let g_hat_sq: f64 = (0..m)
                .map(|z| {
                    let occupied = history[lo..].iter().filter(|r| r[z]).count() as u64;
                    slack(occupied, t_zero, thresholds[z]).powi(2)
                })
                .sum();
            diag.max_gradient_norm_sq = diag.max_gradient_norm_sq.max(g_hat_sq);
            diag.gradient_norm_exceedances += u64::from(g_hat_sq > 1.0);

            for (a, (mult, table)) in multipliers.iter_mut().zip(tables.iter_mut()).enumerate() {
                let grads = compute_gradients(table, &thresholds, k, t_zero)?;
                mult.apply_update(&grads);
                table.discard_before(k);
                #[allow(clippy::needless_range_loop)]
                for z in 0..m {
                    if mult.lambda_prev()[z].to_bits() != prev[z].to_bits() {
                        diag.consensus_violations += 1;
                    }
                    records.push(MultiplierRecord {
                        rollout: k,
                        agent: a,
                        zone_id: config.zones[z].id(),
                        lambda_prev: mult.lambda_prev()[z],
                        lambda_curr: mult.lambda_curr()[z],
                        g_prev: grads.g_prev[z],
                        g_curr: grads.g_curr[z],
                    });
                }
            }

            let mm = mismatch(&next, multipliers.iter().map(MultiplierState::lambda_curr));
            diag.mismatch.push(MismatchRecord {
                rollout: k,
                agent_excess: mm.agent_excess,
                agent_excess_min: mm.agent_excess_min,
            });
            let sq_prev: f64 = prev.iter().map(|l| l * l).sum();
            let sq_next: f64 = next.iter().map(|l| l * l).sum();
            if sq_prev >= 1.0 {
                diag.drift_samples.push(sq_next - sq_prev);
            }
            diag.lambda_sq.push(sq_next);
            diag.boundary_counts.push(diag.occupied_ticks.clone());
            central.push(next);
        }

        if t == horizon {
            break;
        }

        for (count, &r) in diag.occupied_ticks.iter_mut().zip(&truth) {
            *count += u64::from(r);
        }
        let actions = joint_action(&state, &multipliers, &config.policy, &ctx, &mut policy_rngs);
        let next_state = config.grid.step(&state, &actions, &mut env_rng)?;
        if options.record_trajectory {
            trajectory.push(TickRecord {
                t,
                positions: state.positions.clone(),
                actions,
                rewards: truth.clone(),
            });
        }
        history.push(truth);
        state = next_state;
    }

    diag.trailing_window = (horizon / 10).max(1);
    for z in 0..m {
        let (min, gap) = window_stats(history.iter().map(|r| r[z]), diag.trailing_window as usize);
        diag.trailing_min.push(min);
        diag.longest_gap.push(gap);
    }

    Ok(RunArtifacts {
        conditions,
        trajectory,
        multipliers: records,
        central_lambda: central,
        messages,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize, zones: Vec<ZoneSpec>) -> RunConfig {
        let topology = Topology::path(n).unwrap();
        RunConfig {
            grid: GridSpec::new(6, 6, 0.0).unwrap(),
            zones,
            starts: (0..n as u32).map(|i| Coord::new(i, 0)).collect(),
            retention: topology.diameter(),
            topology,
            links: LinkModel::Static,
            policy: PolicyParams::LagrangianGreedy,
            eta: 0.1,
            t_zero: 10,
            rollouts: 20,
            seed: 1,
            beta: 0.0,
            epsilon: 0.0,
        }
    }

    #[test]
    fn conditions_by_arithmetic() {
        let zones: Vec<ZoneSpec> = (0..4)
            .map(|i| ZoneSpec::rect(i + 1, Coord::new(i, 5), Coord::new(i, 5), 0.45).unwrap())
            .collect();
        let mut cfg = base(3, zones);
        cfg.eta = 0.05;
        cfg.t_zero = 100;
        let c = check_conditions(&cfg).unwrap();
        assert!((c.delta_c - 0.275).abs() < 1e-15);
        assert_eq!(c.diameter, 2);
        assert!((c.lhs - 0.029).abs() < 1e-15);
        assert!(c.satisfied);
        assert!(c.spec_ok);
    }

    #[test]
    fn threshold_sum_above_team_size() {
        let cs = [0.5, 0.5, 0.5, 0.6];
        let zones: Vec<ZoneSpec> = (0..4)
            .map(|i| {
                ZoneSpec::rect(i + 1, Coord::new(i, 5), Coord::new(i, 5), cs[i as usize]).unwrap()
            })
            .collect();
        let c = check_conditions(&base(3, zones)).unwrap();
        assert!(!c.spec_ok);
        assert!((c.delta_c - 0.2).abs() < 1e-15);
    }

    #[test]
    fn validation_rejects_short_rollouts() {
        let zones = vec![ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), 0.3).unwrap()];
        let mut cfg = base(4, zones);
        cfg.t_zero = 2;
        assert!(cfg.validate().is_err());
        cfg.t_zero = 3;
        cfg.retention = 2;
        assert!(cfg.validate().is_err());
        cfg.retention = 3;
        assert!(cfg.validate().is_ok());
        cfg.rollouts = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stationed_single_agent_drives_lambda_to_zero() {
        let zones = vec![ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), 0.5).unwrap()];
        let cfg = base(1, zones);
        let out = run(&cfg, RunOptions::default()).unwrap();
        assert_eq!(out.diagnostics.terminal_averages(), vec![1.0]);
        assert!(out.central_lambda.iter().all(|l| l == &vec![0.0]));
        assert!(out.multipliers.iter().all(|r| r.lambda_curr == 0.0));
    }

    #[test]
    fn policy_ignores_other_agents_positions() {
        let zones = vec![
            ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(1, 1), 0.3).unwrap(),
            ZoneSpec::rect(2, Coord::new(4, 4), Coord::new(5, 5), 0.3).unwrap(),
        ];
        let cfg = base(3, zones);
        let ctx = PolicyContext {
            grid: &cfg.grid,
            zones: &cfg.zones,
            n_agents: 3,
        };
        let mut mults: Vec<MultiplierState> = (0..3)
            .map(|a| MultiplierState::new(a, 2, 0.1, 10, 2).unwrap())
            .collect();
        mults[1].apply_update(&crate::dual::DualGradient {
            g_prev: vec![-0.3, 0.2],
            g_curr: vec![-0.1, -0.4],
        });
        let cells: Vec<Coord> = (0..6)
            .flat_map(|x| (0..6).map(move |y| Coord::new(x, y)))
            .collect();
        for &own in &cells {
            let mut reference = None;
            for &other in cells.iter().step_by(5) {
                let state = WorldState::new(vec![other, own, other]);
                let mut rngs: Vec<ChaCha8Rng> = (0..3).map(|a| stream(0, a)).collect();
                let acts = joint_action(
                    &state,
                    &mults,
                    &PolicyParams::LagrangianGreedy,
                    &ctx,
                    &mut rngs,
                );
                assert_eq!(*reference.get_or_insert(acts[1]), acts[1]);
            }
        }
    }
}
