// With one agent the running statistic is the exact log-likelihood ratio.

use arma_rcd::arma::{impulse_response, ArmaFilter, ArmaModel, SignalTrace};
use arma_rcd::detector::{centralized_llr, AgentSpec, DetectorState};
use arma_rcd::network::WeightMatrix;
use arma_rcd::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Largest relative gap between `l(k)` and the dense LLR over `k < len`.
pub fn run_example(len: usize, seed: u64) -> Result<f64> {
    let spec = AgentSpec::new(
        ArmaModel::new(vec![0.8], vec![0.3], 1.0)?,
        ArmaModel::new(vec![0.4], vec![-0.2], 1.5)?,
    );
    let theta = impulse_response(&spec.signal, len)?.samples;
    let mut noise = ArmaFilter::new(spec.noise.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = theta
        .iter()
        .map(|t| Ok(t + noise.step(rng.sample(StandardNormal))?))
        .collect::<Result<_>>()?;

    let trace = [SignalTrace::new(0, y.clone())?];
    let specs = vec![spec];
    let mut det = DetectorState::from_specs(&specs, WeightMatrix::from_rows(&[vec![1.0]])?, 0.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..len {
        det.step(&y[k..=k])?;
        let exact = centralized_llr(&specs, &trace, k)?[0];
        let rel = (det.statistics()[0] - exact).abs() / exact.abs().max(1.0);
        worst = worst.max(rel);
        if k % 50 == 0 {
            println!("k = {k:3}: l = {:+.6}, llr = {exact:+.6}", det.statistics()[0]);
        }
    }
    println!("max relative gap {worst:.2e}");
    Ok(worst)
}

fn main() -> Result<()> {
    run_example(200, 11)?;
    Ok(())
}
