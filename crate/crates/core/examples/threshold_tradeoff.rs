// Moving the threshold in regime b trades one floor against the other.

use arma_rcd::analysis::classify;
use arma_rcd::scenario::DcScenario;
use arma_rcd::sim::{run_experiment, Hypothesis};
use arma_rcd::Result;

pub struct TradeoffPoint {
    pub gamma: f64,
    pub floor_f: f64,
    pub floor_m: f64,
    pub miss_floor_above_half: bool,
    pub p_false_alarm: f64,
    pub p_miss: f64,
}

pub fn run_example(gammas: &[f64], trials: usize, workers: usize) -> Result<Vec<TradeoffPoint>> {
    let mut cfg = DcScenario::regime_b().experiment()?;
    cfg.trials = trials;
    cfg.horizon = 300;
    cfg.stride = 300;
    cfg.hypothesis = Hypothesis::Both;
    cfg.seed = 4;
    let summary = cfg.validate()?;
    let n = cfg.n();

    gammas
        .iter()
        .map(|&gamma| {
            let r = classify(&summary, n, gamma)?;
            cfg.gamma = gamma;
            let curves = run_experiment(&cfg, workers)?;
            let avg = |p: &dyn Fn(usize) -> Option<f64>| (0..n).filter_map(p).sum::<f64>() / n as f64;
            let point = TradeoffPoint {
                gamma,
                floor_f: r.floor_f.unwrap_or(f64::NAN),
                floor_m: r.floor_m.unwrap_or(f64::NAN),
                miss_floor_above_half: r.miss_floor_above_half,
                p_false_alarm: avg(&|i| curves.p_false_alarm(i, cfg.horizon)),
                p_miss: avg(&|i| curves.p_miss(i, cfg.horizon)),
            };
            println!(
                "gamma {gamma:+.4}: floors ({:.4}, {:.4}), simulated ({:.4}, {:.4}){}",
                point.floor_f,
                point.floor_m,
                point.p_false_alarm,
                point.p_miss,
                if point.miss_floor_above_half { ", miss floor above 1/2" } else { "" }
            );
            Ok(point)
        })
        .collect()
}

fn main() -> Result<()> {
    run_example(&[-0.05, -0.02, 0.0, 0.02, 0.05], 1000, 0)?;
    Ok(())
}
