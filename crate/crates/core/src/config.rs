//! JSON experiment configs.
//!
//! ```json
//! {
//!   "version": 1,
//!   "graph": {"type": "erdos_renyi", "n": 40, "p": 0.184, "seed": 31,
//!             "weights": {"rule": "laplacian"}},
//!   "gamma": 0.0,
//!   "agents": [{"signal": {"ar": [1.0], "gain": 1.0},
//!               "noise": {"ar": [1.0], "ma": [0.3], "gain": 10.0}}],
//!   "simulation": {"trials": 10000, "horizon": 4000, "seed": 7},
//!   "muted": []
//! }
//! ```
//!
//! Graph types are `erdos_renyi`, `complete`, `path`, `cycle`, `star` and
//! `edges` (explicit `edges: [[i, j], ...]`). Weight rules are `laplacian`,
//! `metropolis` and `explicit` (with `rows`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::AgentSpec;
use crate::error::{Error, Result};
use crate::network::{erdos_renyi, laplacian_weights, metropolis_weights, Graph, WeightMatrix};
use crate::scenario::reference_edge_probability;
use crate::sim::{ExperimentConfig, Hypothesis};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphType {
    ErdosRenyi,
    Complete,
    Path,
    Cycle,
    Star,
    Edges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Laplacian,
    Metropolis,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub rule: WeightRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(rename = "type")]
    pub kind: GraphType,
    pub n: usize,
    /// Edge probability; defaults to `2 ln(n) / n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    pub weights: WeightSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub graph: GraphSpec,
    #[serde(default)]
    pub gamma: f64,
    pub agents: Vec<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub muted: Vec<usize>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub hypothesis: Option<Hypothesis>,
    pub gamma: Option<f64>,
    pub stride: Option<usize>,
}

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_HORIZON: usize = 300;
pub const DEFAULT_STRIDE: usize = 10;

impl ConfigFile {
    /// Parses `text`; errors carry the line and column within `path`.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| {
            let line = e.line();
            let context = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end().to_string();
            Error::Parse {
                path: path.to_string(),
                line,
                column: e.column(),
                message: e.to_string(),
                context,
            }
        })?;
        if cfg.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                cfg.version
            )));
        }
        if cfg.agents.len() != cfg.graph.n {
            return Err(Error::Config(format!(
                "graph has {} agents but {} agent models are listed",
                cfg.graph.n,
                cfg.agents.len()
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Config(format!("{} is not UTF-8: {e}", path.display())))?;
        Ok((ConfigFile::parse(text, &path.display().to_string())?, bytes))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build_graph(&self) -> Result<Graph> {
        let g = &self.graph;
        match g.kind {
            GraphType::ErdosRenyi => {
                let p = g.p.unwrap_or_else(|| reference_edge_probability(g.n));
                erdos_renyi(g.n, p, g.seed.unwrap_or(0))
            }
            GraphType::Complete => Graph::complete(g.n),
            GraphType::Path => Graph::path(g.n),
            GraphType::Cycle => Graph::cycle(g.n),
            GraphType::Star => Graph::star(g.n),
            GraphType::Edges => {
                let edges = g
                    .edges
                    .as_ref()
                    .ok_or_else(|| Error::Config("graph type \"edges\" needs an \"edges\" list".into()))?;
                Graph::new(g.n, edges.iter().map(|&[i, j]| (i, j)))
            }
        }
    }

    pub fn build_weights(&self, graph: &Graph) -> Result<WeightMatrix> {
        let w = &self.graph.weights;
        match w.rule {
            WeightRule::Laplacian => laplacian_weights(graph),
            WeightRule::Metropolis => metropolis_weights(graph),
            WeightRule::Explicit => {
                let rows = w
                    .rows
                    .as_ref()
                    .ok_or_else(|| Error::Config("weight rule \"explicit\" needs \"rows\"".into()))?;
                let m = WeightMatrix::from_rows(rows)?;
                m.check_conforms(graph)?;
                Ok(m)
            }
        }
    }

    /// Resolves the Monte Carlo settings: flags, then the config, then defaults.
    pub fn experiment(&self, overrides: &Overrides) -> Result<ExperimentConfig> {
        let graph = self.build_graph()?;
        let weights = self.build_weights(&graph)?;
        let sim = self.simulation.clone().unwrap_or_default();
        let mut cfg = ExperimentConfig::new(self.agents.clone(), weights);
        cfg.gamma = overrides.gamma.unwrap_or(self.gamma);
        cfg.trials = overrides.trials.or(sim.trials).unwrap_or(DEFAULT_TRIALS);
        cfg.horizon = overrides.horizon.or(sim.horizon).unwrap_or(DEFAULT_HORIZON);
        cfg.seed = overrides.seed.or(sim.seed).unwrap_or(0);
        cfg.stride = overrides.stride.or(sim.stride).unwrap_or(DEFAULT_STRIDE);
        cfg.hypothesis = overrides.hypothesis.or(sim.hypothesis).unwrap_or(Hypothesis::Both);
        cfg.muted = self.muted.clone();
        Ok(cfg)
    }
}
