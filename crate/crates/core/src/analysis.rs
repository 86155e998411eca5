//! Closed-form asymptotics of the running consensus detector.
//!
//! Everything here is driven by the whitened signal `theta_hat_i`, whose
//! Z-transform is the signal model cascaded with the inverse noise model.
//! When some agent's composite has a pole on the unit circle (`rho = 1`)
//! both error probabilities decay exponentially at rate `alpha / 8`. When
//! all poles are inside, they settle at the floors
//! `Q(sqrt(alpha)/2 +- gamma N / sqrt(alpha))`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arma::{cascade, partial_fractions, transfer_function, RationalTransferFunction};
use crate::detector::{whitened_signal, AgentSpec};
use crate::error::{Error, Result};
use crate::network::WeightMatrix;

/// `|rho - 1|` below this counts as a unit dominant pole.
pub const UNIT_RHO_TOL: f64 = 1e-9;

const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Standard Gaussian tail `Q(t) = P(Z > t)`.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// `ln Q(t)`, finite far past the point where `Q(t)` underflows.
pub fn log_q_function(t: f64) -> f64 {
    if t < LOG_Q_SERIES_FROM {
        return q_function(t).ln();
    }
    // Q(t) = phi(t) / t * (1 - 1/t^2 + 3/t^4 - 15/t^6 + 105/t^8 - ...)
    let u = 1.0 / (t * t);
    let series = 1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u * (1.0 - 7.0 * u * (1.0 - 9.0 * u))));
    -0.5 * t * t - t.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

const LOG_Q_SERIES_FROM: f64 = 20.0;

/// Standard Gaussian density.
pub fn gaussian_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoCase {
    Unit,
    Sub,
}

/// Whitened signal transfer function of one agent, with residues.
pub fn composite(spec: &AgentSpec) -> Result<RationalTransferFunction> {
    let signal = transfer_function(&spec.signal)?;
    let whitener = transfer_function(&spec.noise.inverse())?;
    partial_fractions(&cascade(&signal, &whitener)?)
}

/// Limiting energy of `theta_hat`: `|r_1|^2` per step when the dominant pole
/// is on the unit circle, the total `sum_k |theta_hat(k)|^2` otherwise.
pub fn asymptotic_energy(f: &RationalTransferFunction) -> Result<(RhoCase, f64)> {
    f.check_assumptions()?;
    let f = if f.residues().len() == f.poles().len() {
        f.clone()
    } else {
        partial_fractions(f)?
    };
    let rho = f.spectral_radius();
    if (rho - 1.0).abs() < UNIT_RHO_TOL {
        let j = f
            .dominant_pole_index()
            .ok_or_else(|| Error::Numeric("unit spectral radius without a pole".into()))?;
        return Ok((RhoCase::Unit, f.residues()[j].norm_sqr()));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for (rj, pj) in f.residues().iter().zip(f.poles()) {
        for (rl, pl) in f.residues().iter().zip(f.poles()) {
            sum += rj * rl.conj() / (one - pj * pl.conj());
        }
    }
    if sum.im.abs() > IMAG_RESIDUE_TOL * sum.re.abs().max(1.0) {
        return Err(Error::Numeric(format!("energy has imaginary part {:e}", sum.im)));
    }
    Ok((RhoCase::Sub, sum.re))
}

/// Per-agent spectral data of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpectrum {
    pub agent: usize,
    /// `None` for an agent whose whitened signal is forced to zero.
    pub composite: Option<RationalTransferFunction>,
    pub rho: f64,
    pub case: RhoCase,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub agents: Vec<AgentSpectrum>,
    pub rho: f64,
}

impl SpectralSummary {
    pub fn from_specs(specs: &[AgentSpec]) -> Result<Self> {
        SpectralSummary::with_muted(specs, &[])
    }

    /// Agents listed in `muted` contribute nothing.
    pub fn with_muted(specs: &[AgentSpec], muted: &[usize]) -> Result<Self> {
        let agents = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let f = composite(spec)?;
                if muted.contains(&i) {
                    return Ok(AgentSpectrum {
                        agent: i,
                        composite: None,
                        rho: 0.0,
                        case: RhoCase::Sub,
                        alpha: 0.0,
                    });
                }
                let (case, alpha) = asymptotic_energy(&f)?;
                Ok(AgentSpectrum {
                    agent: i,
                    rho: f.spectral_radius(),
                    composite: Some(f),
                    case,
                    alpha,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rho = agents.iter().map(|a| a.rho).fold(0.0, f64::max);
        Ok(SpectralSummary { agents, rho })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

/// Normalization `f(k)` of the network energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `f(k) = k + 1`
    Linear,
    /// `f(k) = 1`
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEnergy {
    pub agent: usize,
    pub rho: f64,
    pub case: RhoCase,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub scaling: Scaling,
    pub rho: f64,
    pub rho_tolerance: f64,
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Nats.
    pub beta_f: f64,
    pub beta_m: f64,
    pub informative_set: Vec<usize>,
    pub floor_f: Option<f64>,
    pub floor_m: Option<f64>,
    /// `gamma > alpha / (2N)` in regime b: the miss floor exceeds one half.
    pub miss_floor_above_half: bool,
    pub agents: Vec<AgentEnergy>,
}

/// Regime, `alpha`, rates and floors for `n` agents at threshold `gamma`.
pub fn classify(summary: &SpectralSummary, n: usize, gamma: f64) -> Result<AsymptoticReport> {
    if n == 0 || n != summary.agents.len() {
        return Err(Error::Argument(format!(
            "network size {n} does not match {} agents",
            summary.agents.len()
        )));
    }
    if !gamma.is_finite() {
        return Err(Error::NonFinite { context: "threshold", value: gamma });
    }
    let unit = (summary.rho - 1.0).abs() < UNIT_RHO_TOL;
    let informative: Vec<usize> = summary
        .agents
        .iter()
        .filter(|a| if unit { a.case == RhoCase::Unit } else { a.alpha > 0.0 })
        .map(|a| a.agent)
        .collect();
    let alpha: f64 = informative.iter().map(|&i| summary.agents[i].alpha).sum();
    if !(alpha > 0.0) {
        return Err(Error::Degenerate(format!(
            "whitened signal energy alpha = {alpha}; the signal is invisible after whitening"
        )));
    }
    let agents = summary
        .agents
        .iter()
        .map(|a| AgentEnergy {
            agent: a.agent,
            rho: a.rho,
            case: a.case,
            alpha: a.alpha,
        })
        .collect();
    let report = if unit {
        AsymptoticReport {
            regime: Regime::A,
            scaling: Scaling::Linear,
            rho: summary.rho,
            rho_tolerance: UNIT_RHO_TOL,
            n,
            gamma,
            alpha,
            beta_f: alpha / 8.0,
            beta_m: alpha / 8.0,
            informative_set: informative,
            floor_f: None,
            floor_m: None,
            miss_floor_above_half: false,
            agents,
        }
    } else {
        let (half, shift) = (alpha.sqrt() / 2.0, gamma * n as f64 / alpha.sqrt());
        let (log_f, log_m) = (log_q_function(half + shift), log_q_function(half - shift));
        let (floor_f, floor_m) = (log_f.exp(), log_m.exp());
        AsymptoticReport {
            regime: Regime::B,
            scaling: Scaling::Constant,
            rho: summary.rho,
            rho_tolerance: UNIT_RHO_TOL,
            n,
            gamma,
            alpha,
            beta_f: -log_f,
            beta_m: -log_m,
            informative_set: informative,
            floor_f: Some(floor_f),
            floor_m: Some(floor_m),
            miss_floor_above_half: gamma > alpha / (2.0 * n as f64),
            agents,
        }
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentStorage {
    Full,
    Diagonal,
}

/// Mean and covariance of `l(k)` under H1, `k = 0..horizon`. Under H0 the
/// mean flips sign and the covariance is unchanged.
#[derive(Debug, Clone)]
pub struct MomentTrace {
    mean: Vec<Vec<f64>>,
    variance: Vec<Vec<f64>>,
    covariance: Option<Vec<DMatrix<f64>>>,
}

impl MomentTrace {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `mu(k)`.
    pub fn mean(&self, k: usize) -> &[f64] {
        &self.mean[k]
    }

    /// Diagonal of `Omega(k)`.
    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variance[k]
    }

    /// `Omega(k)` when stored in full.
    pub fn covariance(&self, k: usize) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref().map(|c| &c[k])
    }

    /// `P(l_i(k) < gamma | H1)`.
    pub fn predicted_miss(&self, agent: usize, k: usize, gamma: f64) -> f64 {
        let (mu, var) = (self.mean[k][agent], self.variance[k][agent]);
        if var == 0.0 {
            return if mu < gamma { 1.0 } else { 0.0 };
        }
        q_function((mu - gamma) / var.sqrt())
    }

    /// `P(l_i(k) >= gamma | H0)`.
    pub fn predicted_false_alarm(&self, agent: usize, k: usize, gamma: f64) -> f64 {
        let (mu, var) = (self.mean[k][agent], self.variance[k][agent]);
        if var == 0.0 {
            return if -mu >= gamma { 1.0 } else { 0.0 };
        }
        q_function((mu + gamma) / var.sqrt())
    }
}

/// Runs `mu(k) = W mu(k-1) + theta_hat(k)^2 / 2` and
/// `Omega(k) = W Omega(k-1) W + diag(theta_hat(k)^2)` from zero.
///
/// `theta_hat[i]` must hold at least `horizon + 1` samples for every agent.
pub fn moment_trace(
    weights: &WeightMatrix,
    theta_hat: &[Vec<f64>],
    horizon: usize,
    storage: MomentStorage,
) -> Result<MomentTrace> {
    let n = weights.n();
    if theta_hat.len() != n {
        return Err(Error::Argument(format!("{} signals for {n} agents", theta_hat.len())));
    }
    if let Some(short) = theta_hat.iter().position(|t| t.len() <= horizon) {
        return Err(Error::Argument(format!(
            "agent {short} has {} whitened samples, need {}",
            theta_hat[short].len(),
            horizon + 1
        )));
    }
    let w = weights.sparse();
    let mut mu = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut omega = DMatrix::<f64>::zeros(n, n);
    let mut tmp = DMatrix::<f64>::zeros(n, n);
    let mut out = MomentTrace {
        mean: Vec::with_capacity(horizon + 1),
        variance: Vec::with_capacity(horizon + 1),
        covariance: (storage == MomentStorage::Full).then(|| Vec::with_capacity(horizon + 1)),
    };
    for k in 0..=horizon {
        w.mul_vec(&mu, &mut next);
        for (i, m) in next.iter_mut().enumerate() {
            *m += 0.5 * theta_hat[i][k] * theta_hat[i][k];
        }
        std::mem::swap(&mut mu, &mut next);

        // W Omega W = (Omega W)^T W for symmetric Omega and W.
        w.right_mul(&omega, &mut tmp);
        tmp.transpose_to(&mut omega);
        tmp.copy_from(&omega);
        w.right_mul(&tmp, &mut omega);
        for i in 0..n {
            omega[(i, i)] += theta_hat[i][k] * theta_hat[i][k];
        }

        out.mean.push(mu.clone());
        out.variance.push((0..n).map(|i| omega[(i, i)]).collect());
        if let Some(c) = out.covariance.as_mut() {
            c.push(omega.clone());
        }
    }
    Ok(out)
}

/// Whitened signals for every agent, zero for muted ones.
pub fn whitened_signals(specs: &[AgentSpec], muted: &[usize], len: usize) -> Result<Vec<Vec<f64>>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if muted.contains(&i) {
                Ok(vec![0.0; len])
            } else {
                whitened_signal(s, len)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arma::ArmaModel;
    use crate::network::{laplacian_weights, Graph};

    fn dc_in_arma11(a: f64, sigma: f64, b: f64) -> AgentSpec {
        AgentSpec::new(
            ArmaModel::dc_level(a).unwrap(),
            ArmaModel::new(vec![1.0], vec![b], sigma).unwrap(),
        )
    }

    #[test]
    fn q_reference_values() {
        // Frozen with 50-digit arithmetic.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.15865525393145705),
            (0.873, 0.19133153886014302),
            (-1.5, 0.93319279873114193),
            (3.0, 0.0013498980316300945),
            (8.0, 6.2209605742717841e-16),
        ];
        for (t, q) in cases {
            assert!((q_function(t) - q).abs() <= 1e-12 * q, "Q({t}) = {}", q_function(t));
        }
    }

    #[test]
    fn log_q_far_tail() {
        let cases = [
            (20.0, -203.91715537109726394),
            (25.0, -316.63940800802025894),
            (50.0, -1254.8313611394199013),
            (200.0, -20006.217280898190402),
            (1000.0, -500007.82669481218431),
        ];
        for (t, lq) in cases {
            assert!((log_q_function(t) - lq).abs() <= 1e-12 * lq.abs(), "ln Q({t}) = {}", log_q_function(t));
        }
        for t in [-3.0, 0.0, 1.0, 19.9, 30.0, 37.0] {
            assert!((log_q_function(t) - q_function(t).ln()).abs() < 1e-9 * q_function(t).ln().abs().max(1.0));
        }
    }

    #[test]
    fn dc_in_white_noise_energy() {
        let spec = AgentSpec::new(ArmaModel::dc_level(2.0).unwrap(), ArmaModel::white(4.0).unwrap());
        let f = composite(&spec).unwrap();
        let (case, alpha) = asymptotic_energy(&f).unwrap();
        assert_eq!(case, RhoCase::Unit);
        assert!((alpha - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_pole_energy() {
        let (a, s, b) = (1.0, 5.0, 0.6);
        let (case, alpha) = asymptotic_energy(&composite(&dc_in_arma11(a, s, b)).unwrap()).unwrap();
        assert_eq!(case, RhoCase::Sub);
        assert!((alpha - (a * a / (s * s)) / (1.0 - b * b)).abs() < 1e-14);
    }

    #[test]
    fn single_agent_chernoff_rate() {
        let (a, s) = (1.0, 3.0);
        let spec = AgentSpec::new(ArmaModel::dc_level(a).unwrap(), ArmaModel::white(s).unwrap());
        let r = classify(&SpectralSummary::from_specs(&[spec]).unwrap(), 1, 0.0).unwrap();
        assert_eq!(r.regime, Regime::A);
        assert!((r.beta_m - a * a / (8.0 * s * s)).abs() < 1e-16);
        assert_eq!(r.informative_set, vec![0]);
    }

    #[test]
    fn regime_a_singleton() {
        let mut specs: Vec<AgentSpec> = (0..6).map(|i| dc_in_arma11(1.0, 10.0, 0.1 * i as f64 - 0.3)).collect();
        specs[3] = dc_in_arma11(1.0, 10.0, 1.0);
        let r = classify(&SpectralSummary::from_specs(&specs).unwrap(), 6, 0.0).unwrap();
        assert_eq!(r.regime, Regime::A);
        assert_eq!(r.scaling, Scaling::Linear);
        assert_eq!(r.informative_set, vec![3]);
        assert!((r.alpha - 0.01).abs() < 1e-15);
        assert!((r.beta_f - 0.00125).abs() < 1e-16);
    }

    #[test]
    fn regime_b_reference_floor() {
        // alpha = (A/sigma)^2 / (1 - b^2) = 3.0489 with b = 0.5.
        let b = 0.5;
        let sigma = 1.0 / (3.0489f64 * (1.0 - b * b)).sqrt();
        let s = SpectralSummary::from_specs(&[dc_in_arma11(1.0, sigma, b)]).unwrap();
        let r = classify(&s, 1, 0.0).unwrap();
        assert_eq!(r.regime, Regime::B);
        assert_eq!(r.scaling, Scaling::Constant);
        assert!((r.alpha - 3.0489).abs() < 1e-12);
        assert!((r.floor_f.unwrap() - 0.1913).abs() < 5e-4);
        assert_eq!(r.floor_f, r.floor_m);
        assert!((r.beta_f + r.floor_f.unwrap().ln()).abs() < 1e-15);
    }

    #[test]
    fn muted_agents_leave_the_informative_set() {
        let mut specs: Vec<AgentSpec> = (0..4).map(|i| dc_in_arma11(1.0, 5.0, 0.2 * i as f64 + 0.1)).collect();
        specs[1] = dc_in_arma11(1.0, 5.0, 1.0);
        let s = SpectralSummary::with_muted(&specs, &[1]).unwrap();
        let r = classify(&s, 4, 0.0).unwrap();
        assert_eq!(r.regime, Regime::B);
        assert_eq!(r.informative_set, vec![0, 2, 3]);
        assert!(classify(&SpectralSummary::with_muted(&specs, &[0, 1, 2, 3]).unwrap(), 4, 0.0).is_err());
    }

    #[test]
    fn large_gamma_is_flagged() {
        let specs = vec![dc_in_arma11(1.0, 1.0, 0.5); 2];
        let s = SpectralSummary::from_specs(&specs).unwrap();
        let r = classify(&s, 2, 0.0).unwrap();
        assert!(!r.miss_floor_above_half);
        let r = classify(&s, 2, r.alpha).unwrap();
        assert!(r.miss_floor_above_half);
        assert!(r.floor_m.unwrap() > 0.5);
    }

    #[test]
    fn moment_trace_first_step_and_symmetry() {
        let g = Graph::path(3).unwrap();
        let w = laplacian_weights(&g).unwrap();
        let th = vec![vec![1.0, 0.5, 0.2], vec![2.0, 0.0, 1.0], vec![0.0, 3.0, 0.1]];
        let m = moment_trace(&w, &th, 2, MomentStorage::Full).unwrap();
        assert_eq!(m.mean(0), &[0.5, 2.0, 0.0]);
        assert_eq!(m.variance(0), &[1.0, 4.0, 0.0]);
        let c = m.covariance(2).unwrap();
        assert!((c - c.transpose()).amax() < 1e-15);
        // Dense recursion oracle.
        let wd = w.entries();
        let mut mu = nalgebra::DVector::zeros(3);
        let mut om = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let t2 = nalgebra::DVector::from_fn(3, |i, _| th[i][k] * th[i][k]);
            mu = wd * mu + &t2 * 0.5;
            om = wd * om * wd.transpose() + DMatrix::from_diagonal(&t2);
        }
        assert!((c - om).amax() < 1e-14);
        for i in 0..3 {
            assert!((m.mean(2)[i] - mu[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn predictions_are_symmetric_at_zero_threshold() {
        let w = WeightMatrix::from_rows(&[vec![1.0]]).unwrap();
        let m = moment_trace(&w, &[vec![0.3; 10]], 9, MomentStorage::Diagonal).unwrap();
        assert!(m.covariance(0).is_none());
        for k in 0..10 {
            let pm = m.predicted_miss(0, k, 0.0);
            assert_eq!(pm, m.predicted_false_alarm(0, k, 0.0));
            assert!((pm - q_function(0.3 * ((k + 1) as f64).sqrt() / 2.0)).abs() < 1e-15);
        }
    }
}
