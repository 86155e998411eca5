//! Builders for the DC-level reference experiments: every agent observes a
//! constant `A` in random-walk ARMA(1,1) noise
//! `n(k) = n(k-1) + sigma e(k) + sigma b_i e(k-1)` over an Erdos-Renyi graph
//! with Laplacian weights.
//!
//! After whitening, agent `i` sees `(A / sigma) / (1 + b_i z^-1)`, a single
//! pole at `-b_i`. Setting one `b_i = 1` puts that pole on the unit circle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arma::ArmaModel;
use crate::detector::AgentSpec;
use crate::error::Result;
use crate::network::{erdos_renyi, laplacian_weights, Graph, WeightMatrix};
use crate::sim::ExperimentConfig;

/// Agent whose MA coefficient is set to one in the unit-pole experiment.
pub const UNIT_POLE_AGENT: usize = 3;

/// Network size of the reference experiments.
pub const REFERENCE_AGENTS: usize = 40;

/// Graph seed of the shipped configs.
pub const REFERENCE_GRAPH_SEED: u64 = 31;

/// MA-coefficient seed of the shipped configs.
pub const REFERENCE_MA_SEED: u64 = 44;

/// `2 ln(n) / n`, twice the connectivity threshold.
pub fn reference_edge_probability(n: usize) -> f64 {
    2.0 * (n as f64).ln() / n as f64
}

/// `n` coefficients uniform on `(-1, 1)`.
pub fn draw_ma_coefficients(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let b: f64 = rng.random_range(-1.0..1.0);
            if b != -1.0 {
                break b;
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcScenario {
    pub amplitude: f64,
    pub sigma: f64,
    pub ma: Vec<f64>,
    pub graph_seed: u64,
    pub edge_probability: f64,
}

impl DcScenario {
    /// Draws the coefficients; `unit_agent` then gets `b = 1`.
    pub fn new(n: usize, amplitude: f64, sigma: f64, ma_seed: u64, graph_seed: u64, unit_agent: Option<usize>) -> Self {
        let mut ma = draw_ma_coefficients(n, ma_seed);
        if let Some(i) = unit_agent {
            ma[i] = 1.0;
        }
        DcScenario {
            amplitude,
            sigma,
            ma,
            graph_seed,
            edge_probability: reference_edge_probability(n),
        }
    }

    /// `A = 1`, `sigma = 10`, agent 3 on the unit circle.
    pub fn regime_a() -> Self {
        DcScenario::new(REFERENCE_AGENTS, 1.0, 10.0, REFERENCE_MA_SEED, REFERENCE_GRAPH_SEED, Some(UNIT_POLE_AGENT))
    }

    /// `A = 1`, `sigma = 5`, all poles inside the unit circle.
    pub fn regime_b() -> Self {
        DcScenario::new(REFERENCE_AGENTS, 1.0, 5.0, REFERENCE_MA_SEED, REFERENCE_GRAPH_SEED, None)
    }

    pub fn n(&self) -> usize {
        self.ma.len()
    }

    pub fn agents(&self) -> Result<Vec<AgentSpec>> {
        self.ma
            .iter()
            .map(|&b| {
                Ok(AgentSpec::new(
                    ArmaModel::dc_level(self.amplitude)?,
                    ArmaModel::new(vec![1.0], vec![b], self.sigma)?,
                ))
            })
            .collect()
    }

    pub fn graph(&self) -> Result<Graph> {
        erdos_renyi(self.n(), self.edge_probability, self.graph_seed)
    }

    pub fn weights(&self) -> Result<WeightMatrix> {
        laplacian_weights(&self.graph()?)
    }

    /// Closed-form `alpha` over all agents when every `|b_i| < 1`.
    pub fn regime_b_alpha(&self) -> f64 {
        let snr = (self.amplitude / self.sigma).powi(2);
        self.ma.iter().map(|b| snr / (1.0 - b * b)).sum()
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig::new(self.agents()?, self.weights()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_seeded_and_in_range() {
        let a = draw_ma_coefficients(40, 5);
        assert_eq!(a, draw_ma_coefficients(40, 5));
        assert!(a.iter().all(|b| b.abs() < 1.0));
        assert_ne!(a, draw_ma_coefficients(40, 6));
    }

    #[test]
    fn unit_agent_is_overridden() {
        let s = DcScenario::regime_a();
        assert_eq!(s.ma[UNIT_POLE_AGENT], 1.0);
        let b = DcScenario::regime_b();
        assert!(b.ma.iter().all(|x| x.abs() < 1.0));
        for i in (0..40).filter(|&i| i != UNIT_POLE_AGENT) {
            assert_eq!(s.ma[i], b.ma[i]);
        }
    }
}
