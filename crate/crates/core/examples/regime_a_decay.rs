// Regime a: one agent's whitened signal has a pole on the unit circle, so
// its energy grows linearly and both error probabilities decay
// exponentially at the rate `alpha / 8`.

use arma_rcd::analysis::classify;
use arma_rcd::scenario::DcScenario;
use arma_rcd::sim::{run_experiment, Hypothesis};
use arma_rcd::Result;

pub struct DecaySummary {
    pub beta: f64,
    /// `(k, mean over agents of -ln P_M(k) / k)` at the recorded times.
    pub rates: Vec<(usize, f64)>,
    /// Mean over agents of the predicted Gaussian miss probability at `horizon`.
    pub predicted_miss: f64,
    pub empirical_miss: f64,
}

pub fn run_example(trials: usize, horizon: usize, workers: usize) -> Result<DecaySummary> {
    let scenario = DcScenario::regime_a();
    let mut cfg = scenario.experiment()?;
    cfg.trials = trials;
    cfg.horizon = horizon;
    cfg.stride = (horizon / 8).max(1);
    cfg.hypothesis = Hypothesis::H1;
    cfg.seed = 1;

    let report = classify(&cfg.validate()?, cfg.n(), cfg.gamma)?;
    println!("regime {:?}, alpha = {:.4}, beta = {:.6}", report.regime, report.alpha, report.beta_m);

    let curves = run_experiment(&cfg, workers)?;
    let moments = cfg.moments(arma_rcd::analysis::MomentStorage::Diagonal)?;
    let n = cfg.n();
    let mut rates = Vec::new();
    for &k in curves.times.iter().filter(|&&k| k > 0) {
        let finite: Vec<f64> = (0..n).filter_map(|i| curves.miss_rate(i, k)).filter(|r| r.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let rate = finite.iter().sum::<f64>() / finite.len() as f64;
        println!("k = {k:5}: rate {rate:.6}");
        rates.push((k, rate));
    }
    let empirical_miss = (0..n).filter_map(|i| curves.p_miss(i, horizon)).sum::<f64>() / n as f64;
    let predicted_miss = (0..n).map(|i| moments.predicted_miss(i, horizon, cfg.gamma)).sum::<f64>() / n as f64;
    println!("P_M({horizon}): empirical {empirical_miss:.4e}, gaussian {predicted_miss:.4e}");
    Ok(DecaySummary {
        beta: report.beta_m,
        rates,
        predicted_miss,
        empirical_miss,
    })
}

fn main() -> Result<()> {
    run_example(2000, 4000, 0)?;
    Ok(())
}
