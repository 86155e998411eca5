//! Command implementations behind the `arma-rcd` binary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{classify, composite, AsymptoticReport, MomentStorage, Regime, RhoCase, UNIT_RHO_TOL};
use crate::config::{ConfigFile, Overrides};
use crate::error::{Error, Result};
use crate::sim::{run_experiment, trace_trial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheck {
    pub agent: usize,
    pub ok: bool,
    pub rho: Option<f64>,
    pub unit_pole: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheck {
    pub ok: bool,
    pub edges: Option<usize>,
    pub consensus_gap: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub network: NetworkCheck,
    pub agents: Vec<AgentCheck>,
}

impl ValidationReport {
    /// One line per agent plus one for the network.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match (&self.network.error, self.network.edges, self.network.consensus_gap) {
            (Some(e), _, _) => out.push_str(&format!("network: FAIL ({e})\n")),
            (None, Some(m), Some(g)) => out.push_str(&format!("network: ok ({m} edges, consensus gap {g:.6})\n")),
            _ => out.push_str("network: ok\n"),
        }
        for a in &self.agents {
            match (&a.error, a.rho) {
                (Some(e), _) => out.push_str(&format!("agent {}: FAIL ({e})\n", a.agent)),
                (None, Some(r)) if a.unit_pole => {
                    out.push_str(&format!("agent {}: ok (rho = {r}, unit pole)\n", a.agent))
                }
                (None, Some(r)) => out.push_str(&format!("agent {}: ok (rho = {r:.6})\n", a.agent)),
                (None, None) => out.push_str(&format!("agent {}: ok\n", a.agent)),
            }
        }
        out.push_str(if self.ok { "valid\n" } else { "invalid\n" });
        out
    }
}

/// Checks every agent's composite model and the network separately, so one
/// failure does not hide another.
pub fn validate(cfg: &ConfigFile) -> ValidationReport {
    let network = match cfg.build_graph().and_then(|g| Ok((g.edges().len(), cfg.build_weights(&g)?))) {
        Ok((edges, w)) => NetworkCheck {
            ok: true,
            edges: Some(edges),
            consensus_gap: Some(w.consensus_gap()),
            error: None,
        },
        Err(e) => NetworkCheck {
            ok: false,
            edges: None,
            consensus_gap: None,
            error: Some(e.to_string()),
        },
    };
    let agents: Vec<AgentCheck> = cfg
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let checked = composite(spec).and_then(|f| {
                crate::analysis::asymptotic_energy(&f)?;
                Ok(f.spectral_radius())
            });
            match checked {
                Ok(rho) => AgentCheck {
                    agent: i,
                    ok: true,
                    rho: Some(rho),
                    unit_pole: (rho - 1.0).abs() < UNIT_RHO_TOL,
                    error: None,
                },
                Err(e) => AgentCheck {
                    agent: i,
                    ok: false,
                    rho: None,
                    unit_pole: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let muted_ok = cfg.muted.iter().all(|&i| i < cfg.agents.len());
    let ok = network.ok && muted_ok && agents.iter().all(|a| a.ok);
    ValidationReport { ok, network, agents }
}

pub fn cmd_validate(config_path: &Path) -> Result<ValidationReport> {
    let (cfg, _) = ConfigFile::load(config_path)?;
    Ok(validate(&cfg))
}

fn first_failure(report: &ValidationReport) -> Error {
    if let Some(e) = &report.network.error {
        return Error::Network(e.clone());
    }
    match report.agents.iter().find(|a| !a.ok) {
        Some(a) => Error::Config(format!("agent {}: {}", a.agent, a.error.clone().unwrap_or_default())),
        None => Error::Config("invalid muted agent list".into()),
    }
}

/// Asymptotic report at the config's threshold, or `gamma` when given.
pub fn analyze(cfg: &ConfigFile, gamma: Option<f64>) -> Result<AsymptoticReport> {
    let report = validate(cfg);
    if !report.ok {
        return Err(first_failure(&report));
    }
    let summary = crate::analysis::SpectralSummary::with_muted(&cfg.agents, &cfg.muted)?;
    classify(&summary, cfg.agents.len(), gamma.unwrap_or(cfg.gamma))
}

pub fn cmd_analyze(config_path: &Path, gamma: Option<f64>) -> Result<AsymptoticReport> {
    let (cfg, _) = ConfigFile::load(config_path)?;
    analyze(&cfg, gamma)
}

/// Provenance of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub stride: usize,
    pub gamma: f64,
    pub hypothesis: crate::sim::Hypothesis,
    pub workers: usize,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub overrides: Overrides,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub manifest: RunManifest,
    pub final_k: usize,
    /// Largest `|empirical - predicted|` over agents at `final_k`.
    pub max_deviation: f64,
}

impl SimulationSummary {
    pub fn line(&self) -> String {
        format!(
            "{} trials, k = {}: max |empirical - predicted| = {:.4e} ({:.1} s)",
            self.manifest.trials, self.final_k, self.max_deviation, self.manifest.wall_time_seconds
        )
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Removes every file in `created` unless disarmed.
struct Cleanup {
    created: Vec<PathBuf>,
    dir: Option<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.created {
                let _ = fs::remove_file(f);
            }
            if let Some(d) = &self.dir {
                let _ = fs::remove_dir(d);
            }
        }
    }
}

/// Runs the Monte Carlo experiment and writes `error_curves.csv`,
/// `manifest.json` and optionally `trace.csv` into the output directory.
/// Any failure removes the files written so far.
pub fn cmd_simulate(config_path: &Path, opts: &SimulateOptions) -> Result<SimulationSummary> {
    let started = unix_now();
    let clock = Instant::now();
    let (cfg, bytes) = ConfigFile::load(config_path)?;
    let report = validate(&cfg);
    if !report.ok {
        return Err(first_failure(&report));
    }
    let experiment = cfg.experiment(&opts.overrides)?;
    experiment.validate()?;

    let mut cleanup = Cleanup {
        created: Vec::new(),
        dir: (!opts.out_dir.exists()).then(|| opts.out_dir.clone()),
        armed: true,
    };
    fs::create_dir_all(&opts.out_dir)?;

    let curves = run_experiment(&experiment, opts.workers)?;
    let csv_path = opts.out_dir.join("error_curves.csv");
    cleanup.created.push(csv_path.clone());
    curves.write_csv(BufWriter::new(fs::File::create(&csv_path)?))?;
    let mut outputs = vec![csv_path.display().to_string()];

    if opts.trace {
        let trace_path = opts.out_dir.join("trace.csv");
        cleanup.created.push(trace_path.clone());
        trace_trial(&experiment, 0, BufWriter::new(fs::File::create(&trace_path)?))?
            .flush()?;
        outputs.push(trace_path.display().to_string());
    }

    let moments = experiment.moments(MomentStorage::Diagonal)?;
    let max_deviation = curves.max_deviation(&moments, experiment.gamma);
    if !max_deviation.is_finite() {
        return Err(Error::Numeric("error curves produced a non-finite deviation".into()));
    }

    let manifest_path = opts.out_dir.join("manifest.json");
    outputs.push(manifest_path.display().to_string());
    let manifest = RunManifest {
        config_path: config_path.display().to_string(),
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        seed: experiment.seed,
        trials: experiment.trials,
        horizon: experiment.horizon,
        stride: experiment.stride,
        gamma: experiment.gamma,
        hypothesis: experiment.hypothesis,
        workers: opts.workers,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        wall_time_seconds: clock.elapsed().as_secs_f64(),
        outputs,
    };
    cleanup.created.push(manifest_path.clone());
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    cleanup.armed = false;
    Ok(SimulationSummary {
        final_k: experiment.horizon,
        max_deviation,
        manifest,
    })
}

/// Short human summary of an analysis report.
pub fn render_report(r: &AsymptoticReport) -> String {
    let units: Vec<String> = r
        .agents
        .iter()
        .filter(|a| a.case == RhoCase::Unit)
        .map(|a| a.agent.to_string())
        .collect();
    let mut s = format!(
        "regime {}, alpha = {:.6}, beta_F = {:.6}, beta_M = {:.6}, informative = {:?}",
        match r.regime {
            Regime::A => "a",
            Regime::B => "b",
        },
        r.alpha,
        r.beta_f,
        r.beta_m,
        r.informative_set
    );
    if let (Some(f), Some(m)) = (r.floor_f, r.floor_m) {
        s.push_str(&format!(", floors F = {f:.4}, M = {m:.4}"));
    }
    if !units.is_empty() {
        s.push_str(&format!(", unit-pole agents [{}]", units.join(", ")));
    }
    if r.miss_floor_above_half {
        s.push_str(" (warning: gamma > alpha/(2N), miss floor above 1/2)");
    }
    s
}
