//! The monitoring environment: a rectangular grid, agents that move one cell
//! per tick, and zones whose global occupancy is the binary reward.
//!
//! Coordinates are `(x, y)` with `Up` incrementing `y`. Moves that would leave
//! the grid resolve to `Stay`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ContractViolation};

/// A grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Coord { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Stay,
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Stay, Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Move::Stay => "Stay",
            Move::Up => "Up",
            Move::Down => "Down",
            Move::Left => "Left",
            Move::Right => "Right",
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid dimensions and the slip noise of the transition kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    width: u32,
    height: u32,
    slip_prob: f64,
}

impl GridSpec {
    pub fn new(width: u32, height: u32, slip_prob: f64) -> Result<Self, ConfigError> {
        if width == 0 || height == 0 {
            return Err(ConfigError::Invalid(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(0.0..1.0).contains(&slip_prob) {
            return Err(ConfigError::Invalid(format!(
                "slip_prob must be in [0, 1), got {slip_prob}"
            )));
        }
        Ok(GridSpec {
            width,
            height,
            slip_prob,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn slip_prob(&self) -> f64 {
        self.slip_prob
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Destination of `mv` from `from`, or `None` if it would leave the grid.
    pub fn target(&self, from: Coord, mv: Move) -> Option<Coord> {
        let to = match mv {
            Move::Stay => from,
            Move::Up => Coord::new(from.x, from.y.checked_add(1)?),
            Move::Down => Coord::new(from.x, from.y.checked_sub(1)?),
            Move::Left => Coord::new(from.x.checked_sub(1)?, from.y),
            Move::Right => Coord::new(from.x.checked_add(1)?, from.y),
        };
        self.contains(to).then_some(to)
    }

    /// Moves that keep an agent at `from` inside the grid. `Stay` is always first.
    pub fn feasible_moves(&self, from: Coord) -> Vec<Move> {
        Move::ALL
            .into_iter()
            .filter(|&mv| self.target(from, mv).is_some())
            .collect()
    }

    /// Resolves one agent's intended move. Returns the new cell and whether
    /// the move slipped.
    pub fn resolve<R: Rng + ?Sized>(
        &self,
        from: Coord,
        intended: Move,
        rng: &mut R,
    ) -> (Coord, bool) {
        let mut mv = intended;
        let mut slipped = false;
        if self.slip_prob > 0.0 && rng.gen::<f64>() < self.slip_prob {
            let feasible = self.feasible_moves(from);
            mv = feasible[rng.gen_range(0..feasible.len())];
            slipped = true;
        }
        (self.target(from, mv).unwrap_or(from), slipped)
    }

    /// Advances the joint state by one tick.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &WorldState,
        action: &[Move],
        rng: &mut R,
    ) -> Result<WorldState, ContractViolation> {
        if action.len() != state.positions.len() {
            return Err(ContractViolation::ActionLength {
                expected: state.positions.len(),
                got: action.len(),
            });
        }
        let positions = state
            .positions
            .iter()
            .zip(action)
            .map(|(&p, &mv)| self.resolve(p, mv, rng).0)
            .collect();
        Ok(WorldState {
            positions,
            time: state.time + 1,
        })
    }
}

/// A monitored zone: the set of cells it covers and the required long-run
/// fraction of time it must be occupied.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoneSpec {
    id: u32,
    cells: Vec<Coord>,
    threshold: f64,
}

impl ZoneSpec {
    pub fn new(
        id: u32,
        cells: impl IntoIterator<Item = Coord>,
        threshold: f64,
    ) -> Result<Self, ConfigError> {
        let mut cells: Vec<Coord> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        if cells.is_empty() {
            return Err(ConfigError::Invalid(format!("zone {id} has no cells")));
        }
        if !(0.0..1.0).contains(&threshold) {
            return Err(ConfigError::Invalid(format!(
                "zone {id}: threshold must be < 1 and >= 0, got {threshold}"
            )));
        }
        Ok(ZoneSpec {
            id,
            cells,
            threshold,
        })
    }

    /// Axis-aligned rectangle with inclusive corners.
    pub fn rect(id: u32, lo: Coord, hi: Coord, threshold: f64) -> Result<Self, ConfigError> {
        if lo.x > hi.x || lo.y > hi.y {
            return Err(ConfigError::Invalid(format!(
                "zone {id}: rectangle corner {lo} exceeds {hi}"
            )));
        }
        let cells = (lo.x..=hi.x).flat_map(|x| (lo.y..=hi.y).map(move |y| Coord::new(x, y)));
        ZoneSpec::new(id, cells, threshold)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    /// Sorted, deduplicated.
    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contains(&self, c: Coord) -> bool {
        self.cells.binary_search(&c).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub positions: Vec<Coord>,
    pub time: u64,
}

impl WorldState {
    pub fn new(positions: Vec<Coord>) -> Self {
        WorldState { positions, time: 0 }
    }
}

/// Indicator vector of which zones contain `position`.
pub fn local_occupancy(position: Coord, zones: &[ZoneSpec]) -> Vec<bool> {
    zones.iter().map(|z| z.contains(position)).collect()
}

/// Global reward: zone `m` is occupied iff at least one agent is inside it.
pub fn occupancy(state: &WorldState, zones: &[ZoneSpec]) -> Vec<bool> {
    zones
        .iter()
        .map(|z| state.positions.iter().any(|&p| z.contains(p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zones3() -> Vec<ZoneSpec> {
        vec![
            ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(1, 1), 0.3).unwrap(),
            ZoneSpec::rect(2, Coord::new(1, 1), Coord::new(2, 2), 0.3).unwrap(),
            ZoneSpec::rect(3, Coord::new(4, 4), Coord::new(4, 4), 0.3).unwrap(),
        ]
    }

    #[test]
    fn boundary_move_clamps_to_stay() {
        let grid = GridSpec::new(5, 5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = WorldState::new(vec![Coord::new(0, 0)]);
        let next = grid.step(&s, &[Move::Left], &mut rng).unwrap();
        assert_eq!(next.positions, vec![Coord::new(0, 0)]);
        assert_eq!(next.time, 1);
    }

    #[test]
    fn up_increments_y() {
        let grid = GridSpec::new(5, 5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = WorldState::new(vec![Coord::new(2, 3)]);
        let next = grid.step(&s, &[Move::Up], &mut rng).unwrap();
        assert_eq!(next.positions, vec![Coord::new(2, 4)]);
    }

    #[test]
    fn action_length_mismatch_is_rejected() {
        let grid = GridSpec::new(5, 5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = WorldState::new(vec![Coord::new(2, 3), Coord::new(0, 0)]);
        assert!(matches!(
            grid.step(&s, &[Move::Up], &mut rng),
            Err(ContractViolation::ActionLength {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn slip_frequency_matches_probability() {
        // Binomial(1e5, 0.2) has sd ~ 0.00126; 0.01 is ~8 sd.
        let grid = GridSpec::new(10, 10, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let slips = (0..trials)
            .filter(|_| grid.resolve(Coord::new(5, 5), Move::Up, &mut rng).1)
            .count();
        let freq = slips as f64 / trials as f64;
        assert!((freq - 0.2).abs() < 0.01, "slip frequency {freq}");
    }

    #[test]
    fn slipped_moves_stay_in_bounds() {
        let grid = GridSpec::new(2, 2, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = Coord::new(0, 0);
        for _ in 0..1000 {
            p = grid.resolve(p, Move::Left, &mut rng).0;
            assert!(grid.contains(p));
        }
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(0, 3, 0.0).is_err());
        assert!(GridSpec::new(3, 3, 1.0).is_err());
        assert!(GridSpec::new(1, 1, 0.0).is_ok());
    }

    #[test]
    fn zone_threshold_must_be_below_one() {
        assert!(ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), 1.2).is_err());
        assert!(ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), 1.0).is_err());
        assert!(ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), -0.1).is_err());
        assert!(ZoneSpec::new(1, [], 0.5).is_err());
    }

    #[test]
    fn local_occupancy_indicators() {
        let zones = zones3();
        assert_eq!(
            local_occupancy(Coord::new(2, 2), &zones),
            vec![false, true, false]
        );
        assert_eq!(
            local_occupancy(Coord::new(1, 1), &zones),
            vec![true, true, false]
        );
        assert_eq!(
            local_occupancy(Coord::new(3, 0), &zones),
            vec![false, false, false]
        );
    }

    #[test]
    fn occupancy_is_max_not_sum() {
        let zones = zones3();
        let inside_and_outside = WorldState::new(vec![Coord::new(4, 4), Coord::new(3, 0)]);
        assert_eq!(
            occupancy(&inside_and_outside, &zones),
            vec![false, false, true]
        );
        let nobody = WorldState::new(vec![Coord::new(3, 0), Coord::new(0, 4)]);
        assert_eq!(occupancy(&nobody, &zones), vec![false; 3]);
        let both = WorldState::new(vec![Coord::new(0, 0), Coord::new(1, 0)]);
        assert_eq!(occupancy(&both, &zones), vec![true, false, false]);
    }

    #[test]
    fn occupancy_is_elementwise_max_of_local_exhaustive() {
        let grid = GridSpec::new(5, 5, 0.0).unwrap();
        let zones = zones3();
        let cells: Vec<Coord> = (0..grid.width())
            .flat_map(|x| (0..grid.height()).map(move |y| Coord::new(x, y)))
            .collect();
        for &a in &cells {
            for &b in &cells {
                let s = WorldState::new(vec![a, b]);
                let la = local_occupancy(a, &zones);
                let lb = local_occupancy(b, &zones);
                let expected: Vec<bool> = la.iter().zip(&lb).map(|(x, y)| *x || *y).collect();
                assert_eq!(occupancy(&s, &zones), expected);
            }
        }
    }

    #[test]
    fn step_replays_from_seed() {
        let grid = GridSpec::new(6, 6, 0.3).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = WorldState::new(vec![Coord::new(3, 3), Coord::new(0, 5)]);
            let mut trace = Vec::new();
            for i in 0..200 {
                let mv = Move::ALL[i % 5];
                s = grid.step(&s, &[mv, Move::Right], &mut rng).unwrap();
                trace.push(s.clone());
            }
            trace
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
