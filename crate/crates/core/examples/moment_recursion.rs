// Mean and variance of the running statistics: Monte Carlo against the
// closed-form recursions.

use arma_rcd::arma::ArmaModel;
use arma_rcd::detector::AgentSpec;
use arma_rcd::network::{metropolis_weights, Graph};
use arma_rcd::sim::{moment_check, ExperimentConfig};
use arma_rcd::Result;

/// Largest `|z|` over agents and checkpoints.
pub fn run_example(trials: usize, workers: usize) -> Result<f64> {
    let agents = (0..6)
        .map(|i| {
            let b = -0.5 + 0.2 * i as f64;
            Ok(AgentSpec::new(
                ArmaModel::new(vec![0.9], vec![], 1.0)?,
                ArmaModel::new(vec![], vec![b], 2.0)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ExperimentConfig::new(agents, metropolis_weights(&Graph::cycle(6)?)?);
    cfg.trials = trials;
    cfg.horizon = 100;
    cfg.seed = 3;

    let report = moment_check(&cfg, &[1, 10, 100], workers)?;
    for r in report.rows.iter().filter(|r| r.agent == 0) {
        println!(
            "k = {:3}: mean {:.4} vs {:.4} (z {:+.2}), variance {:.4} vs {:.4} (z {:+.2})",
            r.k, r.mean, r.mean_theory, r.mean_z, r.variance, r.variance_theory, r.variance_z
        );
    }
    let z = report.max_abs_z();
    println!("max |z| over {} rows: {z:.2}", report.rows.len());
    Ok(z)
}

fn main() -> Result<()> {
    run_example(4000, 0)?;
    Ok(())
}
