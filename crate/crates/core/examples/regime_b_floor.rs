// Regime b: all whitened signals decay, the energy stays bounded, and the
// error probabilities settle on nonzero floors instead of vanishing.

use arma_rcd::analysis::classify;
use arma_rcd::scenario::DcScenario;
use arma_rcd::sim::{run_experiment, Hypothesis};
use arma_rcd::Result;

pub struct FloorSummary {
    pub alpha: f64,
    pub floor_f: f64,
    pub floor_m: f64,
    /// Agent-averaged `P_F` and `P_M` at the horizon.
    pub p_false_alarm: f64,
    pub p_miss: f64,
}

pub fn run_example(trials: usize, horizon: usize, workers: usize) -> Result<FloorSummary> {
    let mut cfg = DcScenario::regime_b().experiment()?;
    cfg.trials = trials;
    cfg.horizon = horizon;
    cfg.hypothesis = Hypothesis::Both;
    cfg.seed = 2;

    let report = classify(&cfg.validate()?, cfg.n(), cfg.gamma)?;
    let (floor_f, floor_m) = (report.floor_f.unwrap_or(f64::NAN), report.floor_m.unwrap_or(f64::NAN));
    println!("alpha = {:.4}, floors P_F = {floor_f:.4}, P_M = {floor_m:.4}", report.alpha);

    let curves = run_experiment(&cfg, workers)?;
    let n = cfg.n() as f64;
    let avg = |f: &dyn Fn(usize) -> Option<f64>| (0..cfg.n()).filter_map(f).sum::<f64>() / n;
    let p_false_alarm = avg(&|i| curves.p_false_alarm(i, horizon));
    let p_miss = avg(&|i| curves.p_miss(i, horizon));
    println!("k = {horizon}: P_F {p_false_alarm:.4}, P_M {p_miss:.4} over {trials} trials");
    Ok(FloorSummary {
        alpha: report.alpha,
        floor_f,
        floor_m,
        p_false_alarm,
        p_miss,
    })
}

fn main() -> Result<()> {
    run_example(2000, 300, 0)?;
    Ok(())
}
