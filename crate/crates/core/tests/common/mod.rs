#![allow(dead_code)]

use gossip_dual::prelude::*;

/// 10x10 grid, three agents on a path graph, four disjoint 2x2 corner zones
/// with `c = 0.45`, `η = 0.05`, `T0 = 100`, `K = 2000`.
pub fn monitoring_config(seed: u64) -> RunConfig {
    let corners = [(0, 0), (8, 0), (0, 8), (8, 8)];
    let zones = corners
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            ZoneSpec::rect(
                i as u32 + 1,
                Coord::new(x, y),
                Coord::new(x + 1, y + 1),
                0.45,
            )
            .unwrap()
        })
        .collect();
    let topology = Topology::path(3).unwrap();
    RunConfig {
        grid: GridSpec::new(10, 10, 0.0).unwrap(),
        zones,
        starts: vec![Coord::new(4, 4), Coord::new(5, 5), Coord::new(4, 5)],
        retention: topology.diameter(),
        topology,
        links: LinkModel::Static,
        policy: PolicyParams::LagrangianGreedy,
        eta: 0.05,
        t_zero: 100,
        rollouts: 2000,
        seed,
        beta: 0.0,
        epsilon: 0.0,
    }
}

pub fn report(id: u32, pass: bool, detail: impl std::fmt::Display) {
    println!(
        "[{}] criterion {id}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
