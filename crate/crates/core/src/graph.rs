//! The agents' communication network.
//!
//! Undirected, unweighted and connected. Connectivity is checked when a
//! [`Topology`] is built, so every instance has a finite diameter.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::env::Coord;
use crate::error::ConfigError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n_agents: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from an undirected edge list. Duplicate edges and
    /// either orientation of the same pair collapse to one edge.
    pub fn new(
        n_agents: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ConfigError> {
        if n_agents == 0 {
            return Err(ConfigError::Invalid(
                "at least one agent is required".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_agents || b >= n_agents {
                return Err(ConfigError::EdgeOutOfRange(a, b, n_agents));
            }
            if a == b {
                return Err(ConfigError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_agents];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let topo = Topology {
            n_agents,
            edges,
            adjacency,
        };
        let reach = topo.hops_from(0);
        if let Some(to) = reach.iter().position(Option::is_none) {
            return Err(ConfigError::Disconnected { from: 0, to });
        }
        Ok(topo)
    }

    pub fn path(n: usize) -> Result<Self, ConfigError> {
        Topology::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn ring(n: usize) -> Result<Self, ConfigError> {
        let closing = (n > 2).then(|| (n - 1, 0));
        Topology::new(n, (1..n).map(|i| (i - 1, i)).chain(closing))
    }

    pub fn star(n: usize) -> Result<Self, ConfigError> {
        Topology::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn complete(n: usize) -> Result<Self, ConfigError> {
        Topology::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    /// Agents laid out row-major on a `rows x cols` lattice, linked to their
    /// 4-neighbours.
    pub fn lattice(rows: usize, cols: usize) -> Result<Self, ConfigError> {
        let idx = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((idx(r, c), idx(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((idx(r, c), idx(r + 1, c)));
                }
            }
        }
        Topology::new(rows * cols, edges)
    }

    /// Links every pair of agents whose positions are within Euclidean
    /// distance `radius`.
    pub fn proximity(positions: &[Coord], radius: f64) -> Result<Self, ConfigError> {
        let r2 = radius * radius;
        let mut edges = Vec::new();
        for (a, pa) in positions.iter().enumerate() {
            for (b, pb) in positions.iter().enumerate().skip(a + 1) {
                let dx = pa.x as f64 - pb.x as f64;
                let dy = pa.y as f64 - pb.y as f64;
                if dx * dx + dy * dy <= r2 {
                    edges.push((a, b));
                }
            }
        }
        Topology::new(positions.len(), edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Sorted `(lo, hi)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.adjacency[n]
    }

    fn hops_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_agents];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or_default();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// BFS hop counts from `source` to every agent.
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        self.hops_from(source)
            .into_iter()
            .map(|d| d.expect("topology is connected"))
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.distances_from(a)[b]
    }

    pub fn diameter(&self) -> usize {
        (0..self.n_agents)
            .flat_map(|s| self.distances_from(s))
            .max()
            .unwrap_or(0)
    }
}

/// Per-tick availability of links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinkModel {
    Static,
    /// Each link is independently usable with probability `p_up` at every tick.
    Bernoulli {
        p_up: f64,
    },
}

impl LinkModel {
    pub fn bernoulli(p_up: f64) -> Result<Self, ConfigError> {
        if !(p_up > 0.0 && p_up <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "p_up must be in (0, 1], got {p_up}"
            )));
        }
        Ok(LinkModel::Bernoulli { p_up })
    }

    pub fn is_static(&self) -> bool {
        matches!(self, LinkModel::Static)
    }
}

/// Edges usable at this tick. `Static` consumes no randomness.
pub fn sample_links<R: Rng + ?Sized>(
    topology: &Topology,
    model: LinkModel,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    match model {
        LinkModel::Static => topology.edges.clone(),
        LinkModel::Bernoulli { p_up } => topology
            .edges
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < p_up)
            .collect(),
    }
}
