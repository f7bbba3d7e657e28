//! Runtime statistics that track the feasibility argument: occupancy
//! averages, the squared multiplier norm, multiplier mismatch, and the
//! conditional drift of the squared norm.

use serde::Serialize;

/// Minimum number of conditioned drift samples for an estimate.
pub const MIN_DRIFT_SAMPLES: usize = 30;

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MismatchRecord {
    pub rollout: u64,
    /// Per zone, `max_n (λ_{m,n} - λ_m)`.
    pub agent_excess: Vec<f64>,
    /// Per zone, `min_n (λ_{m,n} - λ_m)`.
    pub agent_excess_min: Vec<f64>,
}

impl MismatchRecord {
    pub fn max(&self) -> f64 {
        self.agent_excess.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn min(&self) -> f64 {
        self.agent_excess_min
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub zone_ids: Vec<u32>,
    pub thresholds: Vec<f64>,
    /// Number of ticks `T = K * T0` over which rewards are averaged.
    pub horizon: u64,
    /// Per zone, number of ticks `t < T` at which the zone was occupied.
    pub occupied_ticks: Vec<u64>,
    /// Per boundary `k`, occupied-tick counts over `t < (k + 1) * T0`.
    pub boundary_counts: Vec<Vec<u64>>,
    /// Trailing-window length used for the finite-horizon liminf proxy.
    pub trailing_window: u64,
    /// Per zone, minimum average over all windows of `trailing_window` ticks.
    pub trailing_min: Vec<f64>,
    /// Per zone, longest run of consecutive unoccupied ticks.
    pub longest_gap: Vec<u64>,
    /// `‖λ^k‖²` of the centralized multipliers, `k = 0..=K`.
    pub lambda_sq: Vec<f64>,
    pub mismatch: Vec<MismatchRecord>,
    /// `Λ^{k+1} - Λ^k` for every `k` with `‖λ^k‖ >= 1`.
    pub drift_samples: Vec<f64>,
    /// `(agent, zone, τ)` estimates still wrong after their last exchange.
    pub deadline_violations: u64,
    /// `(agent, zone, k)` delayed copies that differ from the centralized value.
    pub consensus_violations: u64,
    /// Rollouts whose centralized gradient has squared norm above one.
    pub gradient_norm_exceedances: u64,
    pub max_gradient_norm_sq: f64,
}

impl Diagnostics {
    pub fn terminal_averages(&self) -> Vec<f64> {
        self.occupied_ticks
            .iter()
            .map(|&n| {
                if self.horizon == 0 {
                    0.0
                } else {
                    n as f64 / self.horizon as f64
                }
            })
            .collect()
    }

    pub fn max_mismatch(&self) -> f64 {
        self.mismatch
            .iter()
            .map(MismatchRecord::max)
            .fold(0.0, f64::max)
    }

    pub fn min_mismatch(&self) -> f64 {
        self.mismatch
            .iter()
            .map(MismatchRecord::min)
            .fold(0.0, f64::min)
    }

    /// Smallest window length such that every window of that length contains
    /// at least one occupied tick, for every zone.
    pub fn coverage_window(&self) -> u64 {
        self.longest_gap.iter().max().map_or(1, |g| g + 1)
    }
}

/// Minimum over all length-`window` windows of the window average, and the
/// longest unoccupied run, for one zone's reward sequence.
pub fn window_stats(occupied: impl IntoIterator<Item = bool>, window: usize) -> (f64, u64) {
    let occupied: Vec<bool> = occupied.into_iter().collect();
    let mut longest = 0u64;
    let mut run = 0u64;
    for &o in &occupied {
        run = if o { 0 } else { run + 1 };
        longest = longest.max(run);
    }
    if window == 0 || occupied.len() < window {
        let avg = occupied.iter().filter(|&&o| o).count() as f64 / occupied.len().max(1) as f64;
        return (avg, longest);
    }
    let mut sum: usize = occupied[..window].iter().filter(|&&o| o).count();
    let mut min = sum;
    for i in window..occupied.len() {
        sum = sum + usize::from(occupied[i]) - usize::from(occupied[i - window]);
        min = min.min(sum);
    }
    (min as f64 / window as f64, longest)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DriftReport {
    Insufficient {
        samples: usize,
    },
    Estimate {
        samples: usize,
        mean: f64,
        ci_low: f64,
        ci_high: f64,
    },
}

impl DriftReport {
    /// A non-positive mean drift is inside the 95% interval.
    pub fn consistent_with_supermartingale(&self) -> Option<bool> {
        match self {
            DriftReport::Insufficient { .. } => None,
            DriftReport::Estimate { ci_low, .. } => Some(*ci_low <= 0.0),
        }
    }
}

/// Sample mean of the conditioned drift with a normal-approximation 95%
/// interval. A supermartingale has non-positive mean drift.
pub fn drift_report(diag: &Diagnostics) -> DriftReport {
    drift_from_samples(&diag.drift_samples)
}

pub fn drift_from_samples(samples: &[f64]) -> DriftReport {
    let n = samples.len();
    if n < MIN_DRIFT_SAMPLES {
        return DriftReport::Insufficient { samples: n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let half = Z_95 * (var / n as f64).sqrt();
    DriftReport::Estimate {
        samples: n,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneFeasibility {
    pub zone_id: u32,
    pub threshold: f64,
    pub average: f64,
    pub trailing_min: f64,
    /// `c_m - average`; positive means the zone fell short.
    pub gap: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub tolerance: f64,
    pub trailing_window: u64,
    pub zones: Vec<ZoneFeasibility>,
}

impl FeasibilityReport {
    pub fn all_pass(&self) -> bool {
        self.zones.iter().all(|z| z.pass)
    }

    pub fn worst_gap(&self) -> f64 {
        self.zones
            .iter()
            .map(|z| z.gap)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per zone, whether the terminal average reached `c_m - tolerance`.
pub fn feasibility_report(diag: &Diagnostics, tolerance: f64) -> FeasibilityReport {
    let averages = diag.terminal_averages();
    let zones = diag
        .zone_ids
        .iter()
        .enumerate()
        .map(|(m, &zone_id)| {
            let threshold = diag.thresholds[m];
            let average = averages[m];
            ZoneFeasibility {
                zone_id,
                threshold,
                average,
                trailing_min: diag.trailing_min.get(m).copied().unwrap_or(average),
                gap: threshold - average,
                pass: average >= threshold - tolerance,
            }
        })
        .collect();
    FeasibilityReport {
        tolerance,
        trailing_window: diag.trailing_window,
        zones,
    }
}
