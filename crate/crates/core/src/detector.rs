//! The running consensus detector.
//!
//! Each agent whitens its observation and its own copy of the known signal
//! with the inverse noise filter, forms the innovation
//! `eta = theta_hat * y_hat - theta_hat^2 / 2`, and the network mixes the
//! running statistics as `l(k) = W l(k-1) + eta(k)` from `l(-1) = 0`.
//! Agent `i` decides H1 at time `k` when `l_i(k) >= gamma`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arma::{ArmaFilter, ArmaModel, SignalTrace};
use crate::error::{ensure_finite, Error, Result};
use crate::network::WeightMatrix;
use crate::whitening::{oracle, WhiteningState};

/// The signal and noise models seen by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub signal: ArmaModel,
    pub noise: ArmaModel,
}

impl AgentSpec {
    pub fn new(signal: ArmaModel, noise: ArmaModel) -> Self {
        AgentSpec { signal, noise }
    }
}

/// Generates `theta(k)`, the signal model driven by a unit impulse.
#[derive(Debug, Clone)]
struct ImpulseSource {
    filter: ArmaFilter,
    started: bool,
}

impl ImpulseSource {
    fn new(model: ArmaModel) -> Self {
        ImpulseSource {
            filter: ArmaFilter::new(model),
            started: false,
        }
    }

    #[inline]
    fn next(&mut self) -> f64 {
        let input = if self.started { 0.0 } else { 1.0 };
        self.started = true;
        self.filter.step_unchecked(input)
    }

    fn reset(&mut self) {
        self.filter.reset();
        self.started = false;
    }
}

/// Per-agent streaming state: two whiteners built from the noise model, one
/// for the observation and one for the locally generated signal.
#[derive(Debug, Clone)]
pub struct AgentChannel {
    spec: AgentSpec,
    theta: ImpulseSource,
    signal_whitener: WhiteningState,
    obs_whitener: WhiteningState,
    muted: bool,
    // Precomputed theta_hat(0..len), shared between clones. Past its end the
    // online sources are replayed up to the current time and take over.
    table: Option<Arc<[f64]>>,
    time: usize,
}

impl AgentChannel {
    pub fn new(spec: AgentSpec) -> Result<Self> {
        let signal_whitener = WhiteningState::new(&spec.noise)?;
        let obs_whitener = signal_whitener.clone();
        Ok(AgentChannel {
            theta: ImpulseSource::new(spec.signal.clone()),
            spec,
            signal_whitener,
            obs_whitener,
            muted: false,
            table: None,
            time: 0,
        })
    }

    /// A channel whose whitened signal is forced to zero, so it contributes
    /// `eta = 0` and only relays its neighbours' statistics.
    pub fn muted(spec: AgentSpec) -> Result<Self> {
        let mut c = AgentChannel::new(spec)?;
        c.muted = true;
        Ok(c)
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn is_muted(&self) -> bool {
        self.muted
    }

    /// Precomputes `theta_hat` for the first `len` steps so that clones skip
    /// the signal filters. Must be called before the first step.
    pub(crate) fn tabulate(&mut self, len: usize) -> Result<()> {
        debug_assert_eq!(self.time, 0);
        if !self.muted {
            self.table = Some(whitened_signal(&self.spec, len)?.into());
        }
        Ok(())
    }

    #[inline]
    fn theta_hat(&mut self) -> f64 {
        let k = self.time;
        self.time += 1;
        if let Some(table) = &self.table {
            if let Some(&v) = table.get(k) {
                return v;
            }
            self.table = None;
            for _ in 0..k {
                self.signal_whitener.step_unchecked(self.theta.next());
            }
        }
        self.signal_whitener.step_unchecked(self.theta.next())
    }

    /// Samples of history held, independent of time.
    pub fn memory_len(&self) -> usize {
        self.theta.filter.memory().len() + self.signal_whitener.memory_len() + self.obs_whitener.memory_len()
    }

    pub fn reset(&mut self) {
        self.theta.reset();
        self.signal_whitener.reset();
        self.obs_whitener.reset();
        self.time = 0;
    }

    /// Consumes `y(k)` and returns `eta(k)`.
    pub fn innovation(&mut self, observation: f64) -> Result<f64> {
        ensure_finite("observation", observation)?;
        Ok(self.innovation_unchecked(observation))
    }

    #[inline]
    fn innovation_unchecked(&mut self, observation: f64) -> f64 {
        if self.muted {
            return 0.0;
        }
        let theta_hat = self.theta_hat();
        let y_hat = self.obs_whitener.step_unchecked(observation);
        theta_hat * y_hat - 0.5 * theta_hat * theta_hat
    }
}

/// `theta_hat(0..len)`: the signal impulse response passed through the
/// inverse noise filter. Deterministic, so shared across trials.
pub fn whitened_signal(spec: &AgentSpec, len: usize) -> Result<Vec<f64>> {
    let mut source = ImpulseSource::new(spec.signal.clone());
    let mut w = WhiteningState::new(&spec.noise)?;
    let out: Vec<f64> = (0..len).map(|_| w.step_unchecked(source.next())).collect();
    for &x in &out {
        ensure_finite("whitened signal", x)?;
    }
    Ok(out)
}

/// Decisions and statistics at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub time: usize,
    pub decisions: Vec<bool>,
    pub statistics: Vec<f64>,
}

/// Network state of the detector for a single realization.
#[derive(Debug, Clone)]
pub struct DetectorState {
    time: Option<usize>,
    statistics: Vec<f64>,
    scratch: Vec<f64>,
    agents: Vec<AgentChannel>,
    weights: WeightMatrix,
    threshold: f64,
}

impl DetectorState {
    pub fn new(agents: Vec<AgentChannel>, weights: WeightMatrix, threshold: f64) -> Result<Self> {
        ensure_finite("threshold", threshold)?;
        if agents.len() != weights.n() {
            return Err(Error::Argument(format!(
                "{} agents but a {}x{} weight matrix",
                agents.len(),
                weights.n(),
                weights.n()
            )));
        }
        let n = agents.len();
        Ok(DetectorState {
            time: None,
            statistics: vec![0.0; n],
            scratch: vec![0.0; n],
            agents,
            weights,
            threshold,
        })
    }

    pub fn from_specs(specs: &[AgentSpec], weights: WeightMatrix, threshold: f64) -> Result<Self> {
        let agents = specs.iter().cloned().map(AgentChannel::new).collect::<Result<_>>()?;
        DetectorState::new(agents, weights, threshold)
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Index of the last processed step, `None` before the first.
    pub fn time(&self) -> Option<usize> {
        self.time
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn statistics(&self) -> &[f64] {
        &self.statistics
    }

    pub fn agents(&self) -> &[AgentChannel] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [AgentChannel] {
        &mut self.agents
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    #[inline]
    pub fn decision(&self, agent: usize) -> bool {
        self.statistics[agent] >= self.threshold
    }

    /// Returns to `l(-1) = 0` with fresh filters.
    pub fn reset(&mut self) {
        self.time = None;
        self.statistics.iter_mut().for_each(|l| *l = 0.0);
        self.agents.iter_mut().for_each(AgentChannel::reset);
    }

    /// Advances one step without materializing a record.
    pub fn step(&mut self, observations: &[f64]) -> Result<()> {
        if observations.len() != self.n() {
            return Err(Error::Argument(format!(
                "{} observations for {} agents",
                observations.len(),
                self.n()
            )));
        }
        if !observations.iter().sum::<f64>().is_finite() {
            let bad = observations.iter().copied().find(|x| !x.is_finite());
            // A finite set can still overflow the sum; only report real offenders.
            if let Some(value) = bad {
                return Err(Error::NonFinite { context: "observation", value });
            }
        }
        self.weights.sparse().mul_vec(&self.statistics, &mut self.scratch);
        for ((l, agent), &y) in self.scratch.iter_mut().zip(&mut self.agents).zip(observations) {
            *l += agent.innovation_unchecked(y);
        }
        std::mem::swap(&mut self.statistics, &mut self.scratch);
        self.time = Some(self.time.map_or(0, |t| t + 1));
        Ok(())
    }

    pub fn record(&self) -> DecisionRecord {
        DecisionRecord {
            time: self.time.unwrap_or(0),
            decisions: (0..self.n()).map(|i| self.decision(i)).collect(),
            statistics: self.statistics.clone(),
        }
    }

    pub fn rcd_step(&mut self, observations: &[f64]) -> Result<DecisionRecord> {
        self.step(observations)?;
        Ok(self.record())
    }
}

/// Per-agent `l_i(k) = theta^T Sigma^-1 y - theta^T Sigma^-1 theta / 2` over
/// samples `0..=k`, by dense Cholesky solves. Quadratic memory; for tests.
pub fn centralized_llr(agents: &[AgentSpec], observations: &[SignalTrace], k: usize) -> Result<Vec<f64>> {
    if agents.len() != observations.len() {
        return Err(Error::Argument(format!(
            "{} agents but {} observation traces",
            agents.len(),
            observations.len()
        )));
    }
    let dim = k + 1;
    agents
        .iter()
        .zip(observations)
        .map(|(spec, trace)| {
            if trace.len() < dim {
                return Err(Error::Argument(format!(
                    "agent {} has {} samples, need {dim}",
                    trace.agent,
                    trace.len()
                )));
            }
            let theta = crate::arma::impulse_response(&spec.signal, dim)?.samples;
            let sigma = oracle::noise_covariance(&spec.noise, dim)?;
            let l = oracle::cholesky(&sigma)?;
            let t = DVector::from_vec(oracle::forward_substitution(&l, &theta)?);
            let y = DVector::from_vec(oracle::forward_substitution(&l, &trace.samples[..dim])?);
            Ok(t.dot(&y) - 0.5 * t.dot(&t))
        })
        .collect()
}

/// Writes `k,agent,l,D` rows, one per agent per step.
pub struct TraceWriter<W: Write> {
    out: W,
    stride: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, stride: usize) -> Result<Self> {
        writeln!(out, "k,agent,l,D")?;
        Ok(TraceWriter { out, stride: stride.max(1) })
    }

    /// Writes the current state if its time falls on the stride.
    pub fn write_state(&mut self, state: &DetectorState) -> Result<()> {
        let Some(k) = state.time() else { return Ok(()) };
        if k % self.stride != 0 {
            return Ok(());
        }
        for (i, l) in state.statistics().iter().enumerate() {
            writeln!(self.out, "{k},{i},{l:e},{}", u8::from(state.decision(i)))?;
        }
        Ok(())
    }

    pub fn write_record(&mut self, record: &DecisionRecord) -> Result<()> {
        for (i, (l, d)) in record.statistics.iter().zip(&record.decisions).enumerate() {
            writeln!(self.out, "{},{i},{l:e},{}", record.time, u8::from(*d))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
