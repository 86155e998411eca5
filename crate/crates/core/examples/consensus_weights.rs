// Weight matrices on a random graph and how fast plain averaging converges.

use arma_rcd::network::{erdos_renyi, laplacian_weights, metropolis_weights, WeightMatrix};
use arma_rcd::scenario::reference_edge_probability;
use arma_rcd::Result;

pub struct WeightsSummary {
    pub edges: usize,
    pub laplacian_gap: f64,
    pub metropolis_gap: f64,
    /// `max_i |(W^steps x)_i - mean(x)|` for the Laplacian weights.
    pub residual: f64,
}

fn average(w: &WeightMatrix, x: &[f64], steps: usize) -> Vec<f64> {
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..steps {
        w.sparse().mul_vec(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

pub fn run_example(n: usize, seed: u64, steps: usize) -> Result<WeightsSummary> {
    let g = erdos_renyi(n, reference_edge_probability(n), seed)?;
    let lap = laplacian_weights(&g)?;
    let met = metropolis_weights(&g)?;
    let degrees = g.degrees();
    println!(
        "{} agents, {} edges, degree {}..{}",
        n,
        g.edges().len(),
        degrees.iter().min().unwrap_or(&0),
        degrees.iter().max().unwrap_or(&0)
    );
    println!("consensus gap: laplacian {:.4}, metropolis {:.4}", lap.consensus_gap(), met.consensus_gap());

    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let y = average(&lap, &x, steps);
    let residual = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    println!("after {steps} steps: max distance to the average {residual:.3e}");

    Ok(WeightsSummary {
        edges: g.edges().len(),
        laplacian_gap: lap.consensus_gap(),
        metropolis_gap: met.consensus_gap(),
        residual,
    })
}

fn main() -> Result<()> {
    run_example(40, 31, 100)?;
    Ok(())
}
