// Muting agents in regime a. Only the agent whose whitened signal has a
// unit pole drives the decay rate; silencing any other agent barely moves
// it, while silencing that one leaves a bounded-energy network.

use arma_rcd::analysis::classify;
use arma_rcd::scenario::{DcScenario, UNIT_POLE_AGENT};
use arma_rcd::sim::{run_experiment, ExperimentConfig, Hypothesis};
use arma_rcd::Result;

pub struct MutingSummary {
    pub baseline: f64,
    pub muted_other: f64,
    pub muted_unit: f64,
}

fn mean_rate(cfg: &ExperimentConfig, workers: usize) -> Result<f64> {
    let curves = run_experiment(cfg, workers)?;
    let rates: Vec<f64> = (0..cfg.n()).filter_map(|i| curves.miss_rate(i, cfg.horizon)).collect();
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

pub fn run_example(trials: usize, horizon: usize, other: usize, workers: usize) -> Result<MutingSummary> {
    let mut cfg = DcScenario::regime_a().experiment()?;
    cfg.trials = trials;
    cfg.horizon = horizon;
    cfg.hypothesis = Hypothesis::H1;
    cfg.seed = 1;

    let mut run = |muted: Vec<usize>| -> Result<f64> {
        cfg.muted = muted;
        let report = classify(&cfg.validate()?, cfg.n(), cfg.gamma)?;
        let rate = mean_rate(&cfg, workers)?;
        println!(
            "muted {:?}: regime {:?}, informative {:?}, rate {rate:.6}",
            cfg.muted, report.regime, report.informative_set
        );
        Ok(rate)
    };
    Ok(MutingSummary {
        baseline: run(vec![])?,
        muted_other: run(vec![other])?,
        muted_unit: run(vec![UNIT_POLE_AGENT])?,
    })
}

fn main() -> Result<()> {
    run_example(1000, 4000, 18, 0)?;
    Ok(())
}
