// Signal and noise models as filters and as rational transfer functions.
//
// Builds an ARMA(2,1) signal with poles 0.5 and 0.4 in ARMA(1,1) noise,
// compares the time-domain impulse response of the whitened signal with its
// partial-fraction form, and shows that a repeated pole is rejected.

use arma_rcd::analysis::{asymptotic_energy, composite};
use arma_rcd::arma::{impulse_response, transfer_function, ArmaModel};
use arma_rcd::detector::{whitened_signal, AgentSpec};
use arma_rcd::Result;

pub struct FilterSummary {
    pub max_modal_error: f64,
    pub rho: f64,
    pub energy: f64,
    pub repeated_pole_rejected: bool,
}

pub fn run_example(len: usize) -> Result<FilterSummary> {
    let signal = ArmaModel::new(vec![0.9, -0.2], vec![0.5], 1.5)?;
    let noise = ArmaModel::new(vec![0.3], vec![0.4], 0.8)?;
    let tf = transfer_function(&signal)?;
    println!("signal poles {:?}", tf.poles());
    println!("signal zeros {:?}", tf.zeros());

    let theta = impulse_response(&signal, 5)?;
    println!("theta(0..5) = {:?}", theta.samples);

    let spec = AgentSpec::new(signal, noise);
    let f = composite(&spec)?;
    let modal = f.modal_response(len)?;
    let direct = whitened_signal(&spec, len)?;
    let max_modal_error = modal
        .iter()
        .zip(&direct)
        .map(|(m, d)| (m.re - d).abs().max(m.im.abs()))
        .fold(0.0, f64::max);
    let (_, energy) = asymptotic_energy(&f)?;
    println!("whitened: rho = {:.4}, energy = {energy:.6}, modal error = {max_modal_error:.2e}", f.spectral_radius());

    // (1 - 0.5 w)^2 has a double pole at 0.5.
    let doubled = AgentSpec::new(ArmaModel::new(vec![1.0, -0.25], vec![], 1.0)?, ArmaModel::white(1.0)?);
    let repeated_pole_rejected = composite(&doubled).and_then(|f| asymptotic_energy(&f)).is_err();
    println!("double pole rejected: {repeated_pole_rejected}");

    Ok(FilterSummary {
        max_modal_error,
        rho: f.spectral_radius(),
        energy,
        repeated_pole_rejected,
    })
}

fn main() -> Result<()> {
    run_example(200)?;
    Ok(())
}
