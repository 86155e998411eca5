//! Cholesky factors of ARMA noise covariances and the streaming whitening
//! filter that applies their inverse.
//!
//! For a noise model with AR coefficients `a`, MA coefficients `b` and scale
//! `sigma`, the covariance of `(n(0), ..., n(k))` factors as `L L^T` with
//! `L = sigma (I - A)^-1 B`, where `A` is strictly lower triangular carrying
//! the AR band and `B` is unit lower triangular carrying the MA band. Solving
//! `L z_hat = z` row by row is the inverse ARMA filter, so whitening needs
//! only `p + q` samples of memory.

use nalgebra::{DMatrix, DVector};

use crate::arma::{filter_step_unchecked as step, ArmaModel, FilterMemory};
use crate::error::{ensure_finite, Error, Result};

/// The banded matrices `I - A` and `B` at dimension `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFactors {
    lower_unit_banded: DMatrix<f64>,
    ma_banded: DMatrix<f64>,
    sigma: f64,
}

impl CovarianceFactors {
    /// Dimension-1 factors, `I - A = [1]`, `B = [1]`.
    pub fn initial(noise: &ArmaModel) -> Result<Self> {
        let sigma = noise_scale(noise)?;
        Ok(CovarianceFactors {
            lower_unit_banded: DMatrix::identity(1, 1),
            ma_banded: DMatrix::identity(1, 1),
            sigma,
        })
    }

    /// Factors for `(n(0), ..., n(dimension - 1))`.
    pub fn with_dimension(noise: &ArmaModel, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Argument("covariance dimension must be at least 1".into()));
        }
        let mut f = CovarianceFactors::initial(noise)?;
        while f.dimension() < dimension {
            f = extend_factors(f, noise);
        }
        Ok(f)
    }

    pub fn dimension(&self) -> usize {
        self.lower_unit_banded.nrows()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `I - A`.
    pub fn lower_unit_banded(&self) -> &DMatrix<f64> {
        &self.lower_unit_banded
    }

    /// `B`.
    pub fn ma_banded(&self) -> &DMatrix<f64> {
        &self.ma_banded
    }

    /// `L = sigma (I - A)^-1 B`, lower triangular with diagonal `sigma`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let ia = &self.lower_unit_banded;
        let mut l = self.ma_banded.clone() * self.sigma;
        // Unit-diagonal forward substitution, column by column.
        for col in 0..n {
            for row in col..n {
                let mut acc = l[(row, col)];
                for m in col..row {
                    acc -= ia[(row, m)] * l[(m, col)];
                }
                l[(row, col)] = acc;
            }
        }
        l
    }
}

fn noise_scale(noise: &ArmaModel) -> Result<f64> {
    let sigma = noise.gain();
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(Error::Argument(format!("noise scale must be positive, got {sigma}")))
    }
}

/// Appends row `k + 1`: `alpha = (0.., a(p), .., a(1))` into `A` and
/// `beta = (0.., b(q), .., b(1))` into `B`.
pub fn extend_factors(factors: CovarianceFactors, noise: &ArmaModel) -> CovarianceFactors {
    let n = factors.dimension();
    let mut ia = factors.lower_unit_banded.resize(n + 1, n + 1, 0.0);
    let mut b = factors.ma_banded.resize(n + 1, n + 1, 0.0);
    ia[(n, n)] = 1.0;
    b[(n, n)] = 1.0;
    for (j, &a) in noise.ar().iter().enumerate() {
        if let Some(col) = n.checked_sub(j + 1) {
            ia[(n, col)] = -a;
        }
    }
    for (j, &m) in noise.ma().iter().enumerate() {
        if let Some(col) = n.checked_sub(j + 1) {
            b[(n, col)] = m;
        }
    }
    CovarianceFactors {
        lower_unit_banded: ia,
        ma_banded: b,
        sigma: factors.sigma,
    }
}

/// `Sigma = L L^T`.
pub fn covariance(factors: &CovarianceFactors) -> DMatrix<f64> {
    let l = factors.cholesky_factor();
    &l * l.transpose()
}

/// Streaming `L^-1 z`: the inverse of the noise filter with zero initial
/// conditions.
#[derive(Debug, Clone)]
pub struct WhiteningState {
    inverse: ArmaModel,
    memory: FilterMemory,
}

impl WhiteningState {
    pub fn new(noise: &ArmaModel) -> Result<Self> {
        noise_scale(noise)?;
        let inverse = noise.inverse();
        let memory = FilterMemory::new(&inverse);
        Ok(WhiteningState { inverse, memory })
    }

    /// Samples held in memory: `q` whitened outputs and `p` raw inputs.
    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn reset(&mut self) {
        self.memory.reset();
    }

    pub fn whiten_step(&mut self, sample: f64) -> Result<f64> {
        ensure_finite("whitening input", sample)?;
        Ok(self.step_unchecked(sample))
    }

    #[inline]
    pub(crate) fn step_unchecked(&mut self, sample: f64) -> f64 {
        step(&self.inverse, &mut self.memory, sample)
    }
}

/// Dense reference computations used to verify the streaming paths. They
/// cost `O(k^2)` memory and `O(k^3)` time and never run in the detector.
pub mod oracle {
    use super::*;
    use crate::arma::impulse_response;

    /// Unblocked Cholesky `Sigma = L L^T`; fails on a non-positive pivot.
    pub fn cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = sigma.nrows();
        if sigma.ncols() != n {
            return Err(Error::Argument("cholesky needs a square matrix".into()));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = sigma[(j, j)];
            for m in 0..j {
                d -= l[(j, m)] * l[(j, m)];
            }
            if !(d > 0.0) {
                return Err(Error::Numeric(format!("non-positive pivot {d} at row {j}")));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = sigma[(i, j)];
                for m in 0..j {
                    s -= l[(i, m)] * l[(j, m)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Solves `L x = b` for lower-triangular `L`.
    pub fn forward_substitution(l: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
        let n = l.nrows();
        if b.len() != n {
            return Err(Error::Argument(format!("rhs length {} != {n}", b.len())));
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for (j, xj) in x.iter().enumerate().take(i) {
                s -= l[(i, j)] * xj;
            }
            x[i] = s / l[(i, i)];
        }
        Ok(x)
    }

    /// Noise covariance built from the impulse response `h` of the noise
    /// filter: `Sigma = H H^T` with `H` the lower Toeplitz matrix of `h`.
    pub fn noise_covariance(noise: &ArmaModel, dimension: usize) -> Result<DMatrix<f64>> {
        let h = impulse_response(noise, dimension)?.samples;
        let toeplitz = DMatrix::from_fn(dimension, dimension, |i, j| if i >= j { h[i - j] } else { 0.0 });
        Ok(&toeplitz * toeplitz.transpose())
    }

    /// `L^-1 z` by dense forward substitution against the recursive factor.
    pub fn whiten_dense(noise: &ArmaModel, z: &[f64]) -> Result<Vec<f64>> {
        let f = CovarianceFactors::with_dimension(noise, z.len())?;
        forward_substitution(&f.cholesky_factor(), z)
    }

    /// Dense `x^T Sigma^-1 y` through the Cholesky factor of `sigma`.
    pub fn quadratic_form(sigma: &DMatrix<f64>, x: &[f64], y: &[f64]) -> Result<f64> {
        let l = cholesky(sigma)?;
        let u = forward_substitution(&l, x)?;
        let v = forward_substitution(&l, y)?;
        Ok(DVector::from_vec(u).dot(&DVector::from_vec(v)))
    }
}
