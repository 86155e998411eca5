//! ARMA filters in the time domain and their rational Z-transforms.
//!
//! Coefficient convention used throughout the crate: an [`ArmaModel`] with
//! autoregressive coefficients `ar` (length `p`), moving-average
//! coefficients `ma` (length `q`) and gain `g` maps an input `x` to
//!
//! ```text
//! y(k) = ar[0] y(k-1) + ... + ar[p-1] y(k-p) + g (x(k) + ma[0] x(k-1) + ... + ma[q-1] x(k-q))
//! ```
//!
//! with zero initial conditions, i.e. in the Z-domain
//!
//! ```text
//! Y(z^-1) = g (1 + sum_j ma[j-1] z^-j) / (1 - sum_j ar[j-1] z^-j) X(z^-1).
//! ```
//!
//! A noise model `n(k) = sum a(j) n(k-j) + s e(k) + s sum b(j) e(k-j)` is
//! therefore `ArmaModel::new(a, b, s)`, and a deterministic signal driven by
//! `A delta(k)` is `ArmaModel::new(a_bar, b_bar, A)` fed a unit impulse.

mod poly;
mod transfer;

pub use poly::{expand_from_roots, reciprocal_roots};
pub use transfer::{
    cascade, partial_fractions, transfer_function, RationalTransferFunction, CANCELLATION_TOL,
    POLE_UNIQUENESS_TOL,
};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Coefficients and gain of one ARMA(p, q) filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArmaModel", into = "RawArmaModel")]
pub struct ArmaModel {
    ar: Vec<f64>,
    ma: Vec<f64>,
    gain: f64,
}

#[derive(Serialize, Deserialize)]
struct RawArmaModel {
    #[serde(default)]
    ar: Vec<f64>,
    #[serde(default)]
    ma: Vec<f64>,
    gain: f64,
}

impl TryFrom<RawArmaModel> for ArmaModel {
    type Error = Error;

    fn try_from(raw: RawArmaModel) -> Result<Self> {
        ArmaModel::new(raw.ar, raw.ma, raw.gain)
    }
}

impl From<ArmaModel> for RawArmaModel {
    fn from(m: ArmaModel) -> Self {
        RawArmaModel {
            ar: m.ar,
            ma: m.ma,
            gain: m.gain,
        }
    }
}

impl ArmaModel {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>, gain: f64) -> Result<Self> {
        for &c in ar.iter().chain(ma.iter()) {
            ensure_finite("ARMA coefficient", c)?;
        }
        ensure_finite("ARMA gain", gain)?;
        if gain == 0.0 {
            return Err(Error::Argument("ARMA gain must be non-zero".into()));
        }
        Ok(ArmaModel { ar, ma, gain })
    }

    /// Memoryless filter `y(k) = gain * x(k)`.
    pub fn white(gain: f64) -> Result<Self> {
        ArmaModel::new(Vec::new(), Vec::new(), gain)
    }

    /// Single unit pole: the impulse response is the constant `amplitude`.
    pub fn dc_level(amplitude: f64) -> Result<Self> {
        ArmaModel::new(vec![1.0], Vec::new(), amplitude)
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `(p, q)`.
    pub fn order(&self) -> (usize, usize) {
        (self.ar.len(), self.ma.len())
    }

    /// The filter that undoes this one: fed this filter's output it
    /// reproduces the input exactly. Applied to a noise model this is the
    /// whitening filter.
    pub fn inverse(&self) -> ArmaModel {
        ArmaModel {
            ar: self.ma.iter().map(|c| -c).collect(),
            ma: self.ar.iter().map(|c| -c).collect(),
            gain: 1.0 / self.gain,
        }
    }
}

/// The last `p` outputs and last `q` inputs of a filter, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMemory {
    outputs: Vec<f64>,
    inputs: Vec<f64>,
}

impl FilterMemory {
    pub fn new(model: &ArmaModel) -> Self {
        FilterMemory {
            outputs: vec![0.0; model.ar.len()],
            inputs: vec![0.0; model.ma.len()],
        }
    }

    /// Number of stored samples, `p + q` for every `k`.
    pub fn len(&self) -> usize {
        self.outputs.len() + self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reset(&mut self) {
        self.outputs.fill(0.0);
        self.inputs.fill(0.0);
    }
}

#[inline]
fn push_front(buf: &mut [f64], value: f64) {
    // Buffers hold a handful of samples; a plain shift beats memmove.
    for i in (1..buf.len()).rev() {
        buf[i] = buf[i - 1];
    }
    if let Some(first) = buf.first_mut() {
        *first = value;
    }
}

/// Advances `memory` by one sample and returns the filter output.
pub fn filter_step(model: &ArmaModel, memory: &mut FilterMemory, input: f64) -> Result<f64> {
    ensure_finite("filter input", input)?;
    Ok(filter_step_unchecked(model, memory, input))
}

#[inline]
pub(crate) fn filter_step_unchecked(model: &ArmaModel, memory: &mut FilterMemory, input: f64) -> f64 {
    let feedback: f64 = model
        .ar
        .iter()
        .zip(&memory.outputs)
        .map(|(a, y)| a * y)
        .sum();
    let feedforward: f64 = model
        .ma
        .iter()
        .zip(&memory.inputs)
        .map(|(b, x)| b * x)
        .sum();
    let output = feedback + model.gain * (input + feedforward);
    push_front(&mut memory.outputs, output);
    push_front(&mut memory.inputs, input);
    output
}

/// A model bundled with its memory.
#[derive(Debug, Clone)]
pub struct ArmaFilter {
    model: ArmaModel,
    memory: FilterMemory,
}

impl ArmaFilter {
    pub fn new(model: ArmaModel) -> Self {
        let memory = FilterMemory::new(&model);
        ArmaFilter { model, memory }
    }

    pub fn model(&self) -> &ArmaModel {
        &self.model
    }

    pub fn memory(&self) -> &FilterMemory {
        &self.memory
    }

    pub fn step(&mut self, input: f64) -> Result<f64> {
        filter_step(&self.model, &mut self.memory, input)
    }

    #[inline]
    pub(crate) fn step_unchecked(&mut self, input: f64) -> f64 {
        filter_step_unchecked(&self.model, &mut self.memory, input)
    }

    pub fn reset(&mut self) {
        self.memory.reset();
    }

    /// Runs the filter over a whole input sequence.
    pub fn apply(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        input.iter().map(|&x| self.step(x)).collect()
    }
}

/// A realization of one agent's signal, noise or observation stream,
/// `samples[k]` for `k = 0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub agent: usize,
    pub samples: Vec<f64>,
}

impl SignalTrace {
    pub fn new(agent: usize, samples: Vec<f64>) -> Result<Self> {
        for &s in &samples {
            ensure_finite("signal trace", s)?;
        }
        Ok(SignalTrace { agent, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Output of `model` fed a unit impulse, `length` samples long.
pub fn impulse_response(model: &ArmaModel, length: usize) -> Result<SignalTrace> {
    if length == 0 {
        return Err(Error::Argument("impulse response length must be at least 1".into()));
    }
    let mut filter = ArmaFilter::new(model.clone());
    let samples = (0..length)
        .map(|k| filter.step_unchecked(if k == 0 { 1.0 } else { 0.0 }))
        .collect();
    SignalTrace::new(0, samples)
}
