//! Distributed dual-multiplier execution for multi-agent monitoring.
//!
//! `N` agents patrol `M` zones on a grid. Each zone must be occupied by at
//! least one agent for a fraction `c_m` of the time. Agents price the zones
//! with Lagrange multipliers, agree on which zones were occupied through
//! max-consensus gossip over a communication graph, and update their own
//! multiplier copies by projected stochastic dual descent. Each agent then
//! acts on its own position and its own multipliers only.
//!
//! The crate is organized by stage of that loop:
//!
//! - [`env`]: the grid, zones, transitions and occupancy rewards;
//! - [`graph`]: the communication topology and link availability;
//! - [`gossip`]: per-agent estimate windows and their wire format;
//! - [`dual`]: two-copy multiplier updates and the centralized reference;
//! - [`policy`]: multiplier-conditioned policies;
//! - [`executor`]: the full loop plus [`diagnostics`];
//! - [`config`]: the TOML configuration document;
//! - [`artifacts`]: CSV writers for run outputs.
//!
//! ```
//! use gossip_dual::prelude::*;
//!
//! let grid = GridSpec::new(4, 4, 0.0)?;
//! let zones = vec![ZoneSpec::rect(1, Coord::new(0, 0), Coord::new(0, 0), 0.5)?];
//! let topology = Topology::path(1)?;
//! let config = RunConfig {
//!     grid,
//!     zones,
//!     starts: vec![Coord::new(0, 0)],
//!     topology,
//!     links: LinkModel::Static,
//!     policy: PolicyParams::LagrangianGreedy,
//!     eta: 0.1,
//!     t_zero: 5,
//!     retention: 0,
//!     rollouts: 4,
//!     seed: 0,
//!     beta: 0.0,
//!     epsilon: 0.0,
//! };
//! let out = run(&config, RunOptions::default())?;
//! assert_eq!(out.diagnostics.terminal_averages(), vec![1.0]);
//! # Ok::<(), gossip_dual::Error>(())
//! ```

pub mod artifacts;
pub mod config;
pub mod diagnostics;
pub mod dual;
pub mod env;
pub mod error;
pub mod executor;
pub mod gossip;
pub mod graph;
pub mod policy;

pub use error::{CodecError, ConfigError, ContractViolation, Error};

pub mod prelude {
    pub use crate::diagnostics::{
        drift_report, feasibility_report, Diagnostics, DriftReport, FeasibilityReport,
    };
    pub use crate::dual::{
        centralized_update, compute_gradients, mismatch, DualGradient, MultiplierState,
    };
    pub use crate::env::{local_occupancy, occupancy, Coord, GridSpec, Move, WorldState, ZoneSpec};
    pub use crate::executor::{
        check_conditions, run, RunArtifacts, RunConfig, RunOptions, TheoremConditions,
    };
    pub use crate::gossip::{
        consensus_oracle, decode_message, encode_message, gossip_round, EstimateTable,
        GossipMessage,
    };
    pub use crate::graph::{sample_links, LinkModel, Topology};
    pub use crate::policy::{act, lagrangian_value, rank_assignment, PolicyContext, PolicyParams};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/gossip.md")]
    mod gossip {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/policy.md")]
    mod policy {}
    #[doc = include_str!("../../../book/src/feasibility.md")]
    mod feasibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
