// Streaming whitening of ARMA noise against the dense Cholesky route.

use arma_rcd::arma::{ArmaFilter, ArmaModel};
use arma_rcd::whitening::{oracle, WhiteningState};
use arma_rcd::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct WhiteningSummary {
    /// Largest gap between the streaming and the dense whitened sequence.
    pub max_error: f64,
    /// Sample variance of the whitened noise; close to one.
    pub variance: f64,
}

pub fn run_example(len: usize, seed: u64) -> Result<WhiteningSummary> {
    let noise = ArmaModel::new(vec![0.5, -0.3], vec![0.7], 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = ArmaFilter::new(noise.clone());
    let z: Vec<f64> = (0..len)
        .map(|_| gen.step(rng.sample(StandardNormal)))
        .collect::<Result<_>>()?;

    let mut w = WhiteningState::new(&noise)?;
    let streamed: Vec<f64> = z.iter().map(|&x| w.whiten_step(x)).collect::<Result<_>>()?;
    let dense = oracle::whiten_dense(&noise, &z)?;
    let max_error = streamed.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mean = streamed.iter().sum::<f64>() / len as f64;
    let variance = streamed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len as f64 - 1.0);
    println!("{len} samples: streaming vs dense {max_error:.2e}, whitened variance {variance:.4}");
    Ok(WhiteningSummary { max_error, variance })
}

fn main() -> Result<()> {
    run_example(300, 7)?;
    Ok(())
}
