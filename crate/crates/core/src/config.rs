//! The TOML configuration document.
//!
//! ```toml
//! [grid]
//! width = 10
//! height = 10
//! slip_prob = 0.0
//!
//! [agents]
//! start = [[4, 4], [5, 5], [4, 5]]
//!
//! [[zones]]
//! id = 1
//! rect = [0, 0, 1, 1]       # x0, y0, x1, y1, inclusive
//! c = 0.45
//!
//! [[zones]]
//! id = 2
//! cells = [[9, 9], [8, 9]]
//! c = 0.45
//!
//! [graph]
//! kind = "path"             # path | ring | star | complete | lattice | proximity | edges
//!
//! [links]
//! kind = "static"           # static | bernoulli (with p_up)
//!
//! [dual]
//! eta = 0.05
//! t_zero = 100
//! rollouts = 2000           # d defaults to the graph diameter
//!
//! [policy]
//! kind = "lagrangian_greedy"  # lagrangian_greedy | uniform
//!
//! [run]
//! seed = 7
//!
//! [theorem]
//! beta = 0.0
//! epsilon = 0.0
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::env::{Coord, GridSpec, ZoneSpec};
use crate::error::ConfigError;
use crate::executor::RunConfig;
use crate::graph::{LinkModel, Topology};
use crate::policy::PolicyParams;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub grid: GridSection,
    pub agents: AgentsSection,
    pub zones: Vec<ZoneEntry>,
    pub graph: GraphSection,
    #[serde(default)]
    pub links: LinksSection,
    pub dual: DualSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub theorem: TheoremSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub slip_prob: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub start: Vec<[u32; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneEntry {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<[u32; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<[u32; 4]>,
    pub c: Spanned<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinksSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_up: Option<f64>,
}

impl Default for LinksSection {
    fn default() -> Self {
        LinksSection {
            kind: "static".into(),
            p_up: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSection {
    pub eta: f64,
    pub t_zero: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub rollouts: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: String,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: "lagrangian_greedy".into(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSection {
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub epsilon: f64,
}

/// Numeric keys that a sweep may vary.
pub const SWEEPABLE: [&str; 3] = ["eta", "t_zero", "p_up"];

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument = toml::from_str(text)
            .map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
        doc.check_thresholds(Some(text))?;
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    fn check_thresholds(&self, source: Option<&str>) -> Result<(), ConfigError> {
        for z in &self.zones {
            let c = *z.c.get_ref();
            if !(0.0..1.0).contains(&c) {
                let loc = source
                    .map(|s| format!("line {}: ", line_of(s, z.c.span().start)))
                    .unwrap_or_default();
                let what = if c >= 1.0 {
                    "threshold must be < 1"
                } else {
                    "threshold must be >= 0"
                };
                return Err(ConfigError::Invalid(format!(
                    "{loc}zone {}: {what}, got {c}",
                    z.id
                )));
            }
        }
        Ok(())
    }

    /// Sets a sweepable numeric parameter.
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        match key {
            "eta" => self.dual.eta = value,
            "t_zero" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "t_zero must be a positive integer, got {value}"
                    )));
                }
                self.dual.t_zero = value as u64;
            }
            "p_up" => {
                self.links.kind = "bernoulli".into();
                self.links.p_up = Some(value);
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "'{other}' is not sweepable; expected one of {}",
                    SWEEPABLE.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn to_run_config(&self) -> Result<RunConfig, ConfigError> {
        self.check_thresholds(None)?;
        let grid = GridSpec::new(self.grid.width, self.grid.height, self.grid.slip_prob)?;
        let starts: Vec<Coord> = self
            .agents
            .start
            .iter()
            .map(|&[x, y]| Coord::new(x, y))
            .collect();

        let zones = self
            .zones
            .iter()
            .map(|z| {
                let c = *z.c.get_ref();
                match (&z.cells, &z.rect) {
                    (Some(cells), None) => {
                        ZoneSpec::new(z.id, cells.iter().map(|&[x, y]| Coord::new(x, y)), c)
                    }
                    (None, Some([x0, y0, x1, y1])) => {
                        ZoneSpec::rect(z.id, Coord::new(*x0, *y0), Coord::new(*x1, *y1), c)
                    }
                    _ => Err(ConfigError::Invalid(format!(
                        "zone {}: exactly one of 'cells' or 'rect' is required",
                        z.id
                    ))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        let n = starts.len();
        let g = &self.graph;
        let need = |v: Option<usize>, key: &str| {
            v.ok_or_else(|| {
                ConfigError::Invalid(format!("graph kind '{}' requires '{key}'", g.kind))
            })
        };
        let topology = match g.kind.as_str() {
            "path" => Topology::path(n)?,
            "ring" => Topology::ring(n)?,
            "star" => Topology::star(n)?,
            "complete" => Topology::complete(n)?,
            "lattice" => {
                let (rows, cols) = (need(g.rows, "rows")?, need(g.cols, "cols")?);
                if rows * cols != n {
                    return Err(ConfigError::Invalid(format!(
                        "lattice {rows}x{cols} does not match {n} agents"
                    )));
                }
                Topology::lattice(rows, cols)?
            }
            "proximity" => {
                let radius = g.radius.ok_or_else(|| {
                    ConfigError::Invalid("graph kind 'proximity' requires 'radius'".into())
                })?;
                Topology::proximity(&starts, radius)?
            }
            "edges" => {
                let edges = g.edges.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("graph kind 'edges' requires 'edges'".into())
                })?;
                Topology::new(n, edges.iter().map(|&[a, b]| (a, b)))?
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown graph kind '{other}'"
                )))
            }
        };

        let links =
            match self.links.kind.as_str() {
                "static" => LinkModel::Static,
                "bernoulli" => LinkModel::bernoulli(self.links.p_up.ok_or_else(|| {
                    ConfigError::Invalid("bernoulli links require 'p_up'".into())
                })?)?,
                other => return Err(ConfigError::Invalid(format!("unknown link kind '{other}'"))),
            };

        let policy = match self.policy.kind.as_str() {
            "lagrangian_greedy" => PolicyParams::LagrangianGreedy,
            "uniform" => PolicyParams::Uniform,
            "external" => {
                return Err(ConfigError::Invalid(
                    "external policies are supplied through the library, not the config file"
                        .into(),
                ))
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown policy kind '{other}'"
                )))
            }
        };

        let retention = self.dual.d.unwrap_or_else(|| topology.diameter());
        let config = RunConfig {
            grid,
            zones,
            starts,
            topology,
            links,
            policy,
            eta: self.dual.eta,
            t_zero: self.dual.t_zero,
            retention,
            rollouts: self.dual.rollouts,
            seed: self.run.seed,
            beta: self.theorem.beta,
            epsilon: self.theorem.epsilon,
        };
        config.validate()?;
        Ok(config)
    }

    /// Copy with the gossip horizon pinned, so the echoed document
    /// reproduces the run without recomputing defaults.
    pub fn effective(&self, config: &RunConfig) -> ConfigDocument {
        let mut doc = self.clone();
        doc.dual.d = Some(config.retention);
        doc.run.seed = config.seed;
        doc
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[grid]
width = 10
height = 10

[agents]
start = [[4, 4], [5, 5], [4, 5]]

[[zones]]
id = 1
rect = [0, 0, 1, 1]
c = 0.45

[[zones]]
id = 2
cells = [[9, 9], [8, 9]]
c = 0.3

[graph]
kind = "path"

[dual]
eta = 0.05
t_zero = 100
rollouts = 10

[run]
seed = 7
"#;

    #[test]
    fn parses_sample() {
        let doc = ConfigDocument::parse(SAMPLE).unwrap();
        let cfg = doc.to_run_config().unwrap();
        assert_eq!(cfg.n_agents(), 3);
        assert_eq!(cfg.zones[0].cells().len(), 4);
        assert_eq!(cfg.retention, 2);
        assert_eq!(cfg.links, LinkModel::Static);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn threshold_error_names_the_line() {
        let text = SAMPLE.replace("c = 0.3", "c = 1.2");
        let err = ConfigDocument::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("threshold must be < 1"), "{msg}");
        assert!(msg.contains("line 17"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("[run]\n", "[run]\nspeed = 3\n");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn disconnected_edge_list() {
        let text = SAMPLE
            .replace(
                "start = [[4, 4], [5, 5], [4, 5]]",
                "start = [[4, 4], [5, 5], [4, 5], [0, 9]]",
            )
            .replace(
                "kind = \"path\"",
                "kind = \"edges\"\nedges = [[0, 1], [1, 2]]",
            );
        let err = ConfigDocument::parse(&text)
            .unwrap()
            .to_run_config()
            .unwrap_err();
        assert_eq!(err.to_string(), "graph not connected: no path 0\u{2194}3");
    }

    #[test]
    fn unknown_policy_kind() {
        let text = format!("{SAMPLE}\n[policy]\nkind = \"neural\"\n");
        let err = ConfigDocument::parse(&text)
            .unwrap()
            .to_run_config()
            .unwrap_err();
        assert!(err.to_string().contains("unknown policy kind"));
    }

    #[test]
    fn effective_config_round_trips() {
        let doc = ConfigDocument::parse(SAMPLE).unwrap();
        let cfg = doc.to_run_config().unwrap();
        let echoed = doc.effective(&cfg).to_toml();
        let again = ConfigDocument::parse(&echoed)
            .unwrap()
            .to_run_config()
            .unwrap();
        assert_eq!(again.retention, cfg.retention);
        assert_eq!(again.zones, cfg.zones);
        assert_eq!(again.starts, cfg.starts);
        assert_eq!(again.topology, cfg.topology);
        assert_eq!(again.eta, cfg.eta);
    }

    #[test]
    fn sweep_parameters() {
        let mut doc = ConfigDocument::parse(SAMPLE).unwrap();
        doc.set_param("p_up", 0.5).unwrap();
        assert_eq!(
            doc.to_run_config().unwrap().links,
            LinkModel::Bernoulli { p_up: 0.5 }
        );
        doc.set_param("t_zero", 50.0).unwrap();
        assert_eq!(doc.dual.t_zero, 50);
        assert!(doc.set_param("t_zero", 2.5).is_err());
        assert!(doc.set_param("seed", 1.0).is_err());
    }
}
