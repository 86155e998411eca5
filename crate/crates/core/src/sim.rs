//! Seeded Monte Carlo estimates of the per-agent error probabilities.
//!
//! Trial `t` draws its noise from `ChaCha8Rng` seeded with the base seed on
//! stream `t`, so results depend only on `(seed, trials, horizon)` and never
//! on how trials are spread over worker threads. Error counts are integers
//! and moment sums are reduced in trial order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{moment_trace, whitened_signals, MomentStorage, MomentTrace, SpectralSummary};
use crate::arma::{impulse_response, ArmaFilter};
use crate::detector::{AgentChannel, AgentSpec, DetectorState, TraceWriter};
use crate::error::{Error, Result};
use crate::network::WeightMatrix;

/// Two-sided 95% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
    /// H0 and H1 driven by the same noise realization.
    #[serde(rename = "both")]
    Both,
}

impl Hypothesis {
    pub fn runs_h0(self) -> bool {
        matches!(self, Hypothesis::H0 | Hypothesis::Both)
    }

    pub fn runs_h1(self) -> bool {
        matches!(self, Hypothesis::H1 | Hypothesis::Both)
    }
}

impl std::str::FromStr for Hypothesis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H0" | "h0" => Ok(Hypothesis::H0),
            "H1" | "h1" => Ok(Hypothesis::H1),
            "both" | "Both" => Ok(Hypothesis::Both),
            other => Err(Error::Argument(format!("unknown hypothesis {other:?} (H0, H1 or both)"))),
        }
    }
}

/// A fully resolved Monte Carlo experiment. Time runs over `k = 0..=horizon`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub agents: Vec<AgentSpec>,
    pub weights: WeightMatrix,
    pub gamma: f64,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub stride: usize,
    /// Agents whose whitened signal is forced to zero.
    pub muted: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(agents: Vec<AgentSpec>, weights: WeightMatrix) -> Self {
        ExperimentConfig {
            agents,
            weights,
            gamma: 0.0,
            horizon: 300,
            trials: 1000,
            seed: 0,
            hypothesis: Hypothesis::Both,
            stride: 10,
            muted: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Checks sizes and every agent's model assumptions.
    pub fn validate(&self) -> Result<SpectralSummary> {
        if self.trials == 0 || self.horizon == 0 {
            return Err(Error::Config("trials and horizon must both be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::Config(format!("threshold {} is not finite", self.gamma)));
        }
        if self.agents.len() != self.weights.n() {
            return Err(Error::Config(format!(
                "{} agents but a {}-agent weight matrix",
                self.agents.len(),
                self.weights.n()
            )));
        }
        if let Some(&bad) = self.muted.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Config(format!("muted agent {bad} does not exist")));
        }
        SpectralSummary::with_muted(&self.agents, &self.muted)
    }

    /// Times at which error curves are recorded: multiples of the stride
    /// and always the horizon.
    pub fn record_times(&self) -> Vec<usize> {
        let mut t: Vec<usize> = (0..=self.horizon).step_by(self.stride.max(1)).collect();
        if t.last() != Some(&self.horizon) {
            t.push(self.horizon);
        }
        t
    }

    fn detector(&self) -> Result<DetectorState> {
        let channels = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut c = if self.muted.contains(&i) {
                    AgentChannel::muted(s.clone())?
                } else {
                    AgentChannel::new(s.clone())?
                };
                c.tabulate(self.horizon + 1)?;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        DetectorState::new(channels, self.weights.clone(), self.gamma)
    }

    fn signals(&self) -> Result<Vec<Vec<f64>>> {
        self.agents
            .iter()
            .map(|s| Ok(impulse_response(&s.signal, self.horizon + 1)?.samples))
            .collect()
    }

    /// Theoretical moments of `l(k)` for this configuration.
    pub fn moments(&self, storage: MomentStorage) -> Result<MomentTrace> {
        let th = whitened_signals(&self.agents, &self.muted, self.horizon + 1)?;
        moment_trace(&self.weights, &th, self.horizon, storage)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Reusable per-worker buffers for one realization of both hypotheses.
#[derive(Clone)]
struct Trial {
    noise: Vec<ArmaFilter>,
    h0: DetectorState,
    h1: DetectorState,
    y0: Vec<f64>,
    y1: Vec<f64>,
}

impl Trial {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let det = config.detector()?;
        Ok(Trial {
            noise: config.agents.iter().map(|s| ArmaFilter::new(s.noise.clone())).collect(),
            h0: det.clone(),
            h1: det,
            y0: vec![0.0; config.n()],
            y1: vec![0.0; config.n()],
        })
    }

    fn reset(&mut self) {
        self.noise.iter_mut().for_each(ArmaFilter::reset);
        self.h0.reset();
        self.h1.reset();
    }

    /// Advances both hypotheses by one step.
    fn step(&mut self, rng: &mut ChaCha8Rng, theta: &[Vec<f64>], k: usize, hyp: Hypothesis) -> Result<()> {
        for (i, f) in self.noise.iter_mut().enumerate() {
            let n = f.step_unchecked(rng.sample(StandardNormal));
            self.y0[i] = n;
            self.y1[i] = theta[i][k] + n;
        }
        if hyp.runs_h0() {
            self.h0.step(&self.y0)?;
        }
        if hyp.runs_h1() {
            self.h1.step(&self.y1)?;
        }
        Ok(())
    }
}

/// Empirical error probabilities at the recorded times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurves {
    pub agents: usize,
    pub trials: usize,
    pub times: Vec<usize>,
    /// `false_alarms[t][i]`: trials with `D_i = 1` under H0 at `times[t]`.
    pub false_alarms: Option<Vec<Vec<u64>>>,
    /// `misses[t][i]`: trials with `D_i = 0` under H1 at `times[t]`.
    pub misses: Option<Vec<Vec<u64>>>,
}

/// Half-width of the Wilson score interval for `successes` out of `trials`.
pub fn wilson_half_width(successes: u64, trials: usize) -> f64 {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

impl ErrorCurves {
    pub fn time_index(&self, k: usize) -> Option<usize> {
        self.times.binary_search(&k).ok()
    }

    fn estimate(&self, counts: &Option<Vec<Vec<u64>>>, agent: usize, k: usize) -> Option<f64> {
        let t = self.time_index(k)?;
        counts.as_ref().map(|c| c[t][agent] as f64 / self.trials as f64)
    }

    pub fn p_false_alarm(&self, agent: usize, k: usize) -> Option<f64> {
        self.estimate(&self.false_alarms, agent, k)
    }

    pub fn p_miss(&self, agent: usize, k: usize) -> Option<f64> {
        self.estimate(&self.misses, agent, k)
    }

    /// `-ln P_M(k) / k`; infinite when no misses were observed.
    pub fn miss_rate(&self, agent: usize, k: usize) -> Option<f64> {
        self.p_miss(agent, k).map(|p| -p.ln() / k as f64)
    }

    pub fn false_alarm_rate(&self, agent: usize, k: usize) -> Option<f64> {
        self.p_false_alarm(agent, k).map(|p| -p.ln() / k as f64)
    }

    /// Larger of the available Wilson half-widths.
    pub fn ci_half_width(&self, agent: usize, k: usize) -> Option<f64> {
        let t = self.time_index(k)?;
        [&self.false_alarms, &self.misses]
            .into_iter()
            .flatten()
            .map(|c| wilson_half_width(c[t][agent], self.trials))
            .reduce(f64::max)
    }

    /// Tidy CSV; a column is omitted when its hypothesis was not run.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["k", "agent"];
        if self.false_alarms.is_some() {
            header.push("p_false_alarm");
        }
        if self.misses.is_some() {
            header.push("p_miss");
        }
        header.push("ci_half_width");
        writeln!(out, "{}", header.join(","))?;
        for &k in &self.times {
            for i in 0..self.agents {
                write!(out, "{k},{i}")?;
                if let Some(p) = self.p_false_alarm(i, k) {
                    write!(out, ",{p}")?;
                }
                if let Some(p) = self.p_miss(i, k) {
                    write!(out, ",{p}")?;
                }
                writeln!(out, ",{}", self.ci_half_width(i, k).unwrap_or(f64::NAN))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Largest `|empirical - predicted|` over agents at the final time.
    pub fn max_deviation(&self, moments: &MomentTrace, gamma: f64) -> f64 {
        let Some(&k) = self.times.last() else { return f64::NAN };
        let mut worst: f64 = 0.0;
        for i in 0..self.agents {
            if let Some(p) = self.p_false_alarm(i, k) {
                worst = worst.max((p - moments.predicted_false_alarm(i, k, gamma)).abs());
            }
            if let Some(p) = self.p_miss(i, k) {
                worst = worst.max((p - moments.predicted_miss(i, k, gamma)).abs());
            }
        }
        worst
    }
}

/// Runs `config.trials` independent trials on `workers` threads (`0` picks
/// the machine default).
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<ErrorCurves> {
    config.validate()?;
    let theta = config.signals()?;
    let times = config.record_times();
    let (n, hyp) = (config.n(), config.hypothesis);
    let zero = || vec![vec![0u64; n]; times.len()];
    let template = Trial::new(config)?;

    let (fa, miss) = pool(workers)?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .try_fold(
                || (zero(), zero(), template.clone()),
                |(mut fa, mut miss, mut trial), t| -> Result<_> {
                    trial.reset();
                    let mut rng = trial_rng(config.seed, t);
                    let mut next = 0;
                    for k in 0..=config.horizon {
                        trial.step(&mut rng, &theta, k, hyp)?;
                        if times[next] == k {
                            for i in 0..n {
                                fa[next][i] += u64::from(hyp.runs_h0() && trial.h0.decision(i));
                                miss[next][i] += u64::from(hyp.runs_h1() && !trial.h1.decision(i));
                            }
                            next += 1;
                        }
                    }
                    Ok((fa, miss, trial))
                },
            )
            .map(|r| r.map(|(fa, miss, _)| (fa, miss)))
            .try_reduce(
                || (zero(), zero()),
                |(mut fa, mut miss), (fb, mb)| {
                    add_counts(&mut fa, &fb);
                    add_counts(&mut miss, &mb);
                    Ok((fa, miss))
                },
            )
    })?;

    Ok(ErrorCurves {
        agents: n,
        trials: config.trials,
        times,
        false_alarms: hyp.runs_h0().then_some(fa),
        misses: hyp.runs_h1().then_some(miss),
    })
}

fn add_counts(into: &mut [Vec<u64>], from: &[Vec<u64>]) {
    for (a, b) in into.iter_mut().zip(from) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Empirical against theoretical moments of `l_i(k)` under H1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckRow {
    pub k: usize,
    pub agent: usize,
    pub mean: f64,
    pub mean_theory: f64,
    pub mean_z: f64,
    pub variance: f64,
    pub variance_theory: f64,
    pub variance_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub trials: usize,
    pub rows: Vec<MomentCheckRow>,
}

impl MomentReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.mean_z.abs(), r.variance_z.abs()])
            .fold(0.0, f64::max)
    }
}

/// Trial-averaged mean and variance of `l(k)` under H1 at `checkpoints`,
/// with z-scores against the moment recursions. The mean's standard error is
/// `sqrt(Omega_ii / T)`; the sample variance's is `Omega_ii sqrt(2 / (T - 1))`.
pub fn moment_check(config: &ExperimentConfig, checkpoints: &[usize], workers: usize) -> Result<MomentReport> {
    config.validate()?;
    if config.trials < 2 {
        return Err(Error::Config("moment check needs at least 2 trials".into()));
    }
    if let Some(&k) = checkpoints.iter().find(|&&k| k > config.horizon) {
        return Err(Error::Config(format!("checkpoint {k} is past the horizon {}", config.horizon)));
    }
    let theta = config.signals()?;
    let n = config.n();
    let mut h1_only = config.clone();
    h1_only.hypothesis = Hypothesis::H1;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let template = Trial::new(&h1_only)?;

    // One row of statistics per trial, reduced sequentially for determinism.
    let per_trial: Vec<Vec<f64>> = pool(workers)?.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map_init(
                || template.clone(),
                |trial, t| -> Result<Vec<f64>> {
                    trial.reset();
                    let mut rng = trial_rng(config.seed, t);
                    let mut row = vec![0.0; checkpoints.len() * n];
                    for k in 0..=last {
                        trial.step(&mut rng, &theta, k, Hypothesis::H1)?;
                        for (c, _) in checkpoints.iter().enumerate().filter(|&(_, &ck)| ck == k) {
                            row[c * n..(c + 1) * n].copy_from_slice(trial.h1.statistics());
                        }
                    }
                    Ok(row)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?;

    let mut short = h1_only;
    short.horizon = last;
    let moments = short.moments(MomentStorage::Diagonal)?;
    let tn = config.trials as f64;
    let mut rows = Vec::new();
    for (c, &k) in checkpoints.iter().enumerate() {
        for i in 0..n {
            let col = c * n + i;
            let mean = per_trial.iter().map(|r| r[col]).sum::<f64>() / tn;
            let variance = per_trial.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / (tn - 1.0);
            let (mt, vt) = (moments.mean(k)[i], moments.variance(k)[i]);
            let z = |d: f64, se: f64| if se > 0.0 { d / se } else if d == 0.0 { 0.0 } else { f64::INFINITY };
            rows.push(MomentCheckRow {
                k,
                agent: i,
                mean,
                mean_theory: mt,
                mean_z: z(mean - mt, (vt / tn).sqrt()),
                variance,
                variance_theory: vt,
                variance_z: z(variance - vt, vt * (2.0 / (tn - 1.0)).sqrt()),
            });
        }
    }
    Ok(MomentReport {
        trials: config.trials,
        rows,
    })
}

/// Writes the `(k, agent, l, D)` trace of one trial under H1, or under H0
/// when only H0 is configured.
pub fn trace_trial<W: Write>(config: &ExperimentConfig, trial: usize, out: W) -> Result<W> {
    config.validate()?;
    let theta = config.signals()?;
    let mut t = Trial::new(config)?;
    let mut rng = trial_rng(config.seed, trial);
    let mut writer = TraceWriter::new(out, config.stride)?;
    let hyp = config.hypothesis;
    for k in 0..=config.horizon {
        t.step(&mut rng, &theta, k, hyp)?;
        writer.write_state(if hyp.runs_h1() { &t.h1 } else { &t.h0 })?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::q_function;
    use crate::arma::ArmaModel;
    use crate::network::{laplacian_weights, Graph};

    fn white_dc(n: usize, a: f64, s: f64) -> ExperimentConfig {
        let specs = vec![AgentSpec::new(ArmaModel::dc_level(a).unwrap(), ArmaModel::white(s).unwrap()); n];
        let w = laplacian_weights(&Graph::cycle(n).unwrap()).unwrap();
        ExperimentConfig::new(specs, w)
    }

    #[test]
    fn record_times_include_horizon() {
        let mut c = white_dc(3, 1.0, 1.0);
        c.horizon = 25;
        c.stride = 10;
        assert_eq!(c.record_times(), vec![0, 10, 20, 25]);
        c.horizon = 20;
        assert_eq!(c.record_times(), vec![0, 10, 20]);
    }

    #[test]
    fn infinite_snr_never_misses() {
        let mut c = white_dc(4, 1.0, 1e-6);
        c.trials = 100;
        c.horizon = 20;
        c.stride = 1;
        c.hypothesis = Hypothesis::H1;
        let e = run_experiment(&c, 1).unwrap();
        assert!(e.false_alarms.is_none());
        for k in 1..=20 {
            for i in 0..4 {
                assert_eq!(e.p_miss(i, k), Some(0.0));
            }
        }
    }

    #[test]
    fn white_noise_first_step_matches_q() {
        // l_i(0) ~ N(A^2/2s^2, A^2/s^2) for a single isolated agent.
        let mut c = white_dc(1, 1.0, 1.0);
        c.weights = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        c.trials = 20_000;
        c.horizon = 1;
        c.stride = 1;
        let e = run_experiment(&c, 2).unwrap();
        let q = q_function(0.5);
        for p in [e.p_false_alarm(0, 0).unwrap(), e.p_miss(0, 0).unwrap()] {
            assert!((p - q).abs() < 4.0 * (q * (1.0 - q) / 20_000.0).sqrt());
        }
    }

    #[test]
    fn deterministic_across_workers() {
        let mut c = white_dc(5, 0.5, 1.0);
        c.trials = 64;
        c.horizon = 30;
        c.seed = 99;
        let a = run_experiment(&c, 1).unwrap();
        let b = run_experiment(&c, 3).unwrap();
        assert_eq!(a, b);
        let m1 = moment_check(&c, &[5, 30], 1).unwrap();
        let m3 = moment_check(&c, &[5, 30], 4).unwrap();
        assert_eq!(m1, m3);
        c.seed = 100;
        assert_ne!(run_experiment(&c, 1).unwrap(), a);
    }

    #[test]
    fn csv_columns_follow_hypothesis() {
        let mut c = white_dc(2, 1.0, 1.0);
        c.trials = 10;
        c.horizon = 5;
        c.stride = 5;
        c.hypothesis = Hypothesis::H0;
        let mut buf = Vec::new();
        run_experiment(&c, 1).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("k,agent,p_false_alarm,ci_half_width"));
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        c.hypothesis = Hypothesis::Both;
        let mut buf = Vec::new();
        run_experiment(&c, 1).unwrap().write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,agent,p_false_alarm,p_miss,ci_half_width\n"));
    }

    #[test]
    fn wilson_shrinks_with_trials() {
        let a = wilson_half_width(50, 100);
        let b = wilson_half_width(5000, 10_000);
        assert!((a / b - 10.0).abs() < 0.2);
        assert!(wilson_half_width(0, 100) > 0.0);
    }

    #[test]
    fn invalid_configs_fail_before_running() {
        let mut c = white_dc(2, 1.0, 1.0);
        c.trials = 0;
        assert!(matches!(run_experiment(&c, 1), Err(Error::Config(_))));
        let mut c = white_dc(2, 1.0, 1.0);
        c.muted = vec![7];
        assert!(run_experiment(&c, 1).is_err());
        let mut c = white_dc(2, 1.0, 1.0);
        c.agents[1].noise = ArmaModel::new(vec![], vec![-1.0], 1.0).unwrap();
        assert!(matches!(run_experiment(&c, 1), Err(Error::Assumption(_))));
    }

    #[test]
    fn trace_has_header_and_rows() {
        let mut c = white_dc(3, 1.0, 1.0);
        c.horizon = 4;
        c.stride = 2;
        let out = trace_trial(&c, 0, Vec::new()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
    }
}
