//! Reference computations for the integration tests, written independently
//! of the library's own helpers.

#![allow(dead_code)]

use arma_rcd::arma::ArmaModel;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `count` reciprocal roots of modulus in `[lo, hi)`: real roots and
/// conjugate pairs, so the polynomial has real coefficients.
pub fn random_roots(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(count);
    while roots.len() < count {
        let r = rng.random_range(lo..hi);
        if count - roots.len() >= 2 && rng.random_bool(0.5) {
            let phi = rng.random_range(0.2..3.0);
            roots.push(Complex64::from_polar(r, phi));
            roots.push(Complex64::from_polar(r, -phi));
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            roots.push(Complex64::new(sign * r, 0.0));
        }
    }
    roots
}

/// Coefficients `c` of `prod (1 - r w) = c[0] + c[1] w + ...`, `c[0] = 1`.
pub fn expand(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (j, cj) in c.iter().enumerate() {
            next[j] += cj;
            next[j + 1] -= cj * r;
        }
        c = next;
    }
    c
}

pub fn expand_real(roots: &[Complex64]) -> Vec<f64> {
    expand(roots)
        .into_iter()
        .map(|c| {
            assert!(c.im.abs() < 1e-12, "complex coefficient {c}");
            c.re
        })
        .collect()
}

/// ARMA model with the given pole and zero reciprocal roots.
pub fn model_from_roots(poles: &[Complex64], zeros: &[Complex64], gain: f64) -> ArmaModel {
    let ar: Vec<f64> = expand_real(poles)[1..].iter().map(|c| -c).collect();
    let ma: Vec<f64> = expand_real(zeros)[1..].to_vec();
    ArmaModel::new(ar, ma, gain).unwrap()
}

/// Stable, invertible ARMA(p, q) with `p, q <= max_order`.
pub fn random_arma(rng: &mut ChaCha8Rng, max_order: usize, gain: f64) -> ArmaModel {
    let p = rng.random_range(0..=max_order);
    let q = rng.random_range(0..=max_order);
    let poles = random_roots(rng, p, 0.05, 0.85);
    let zeros = random_roots(rng, q, 0.05, 0.9);
    model_from_roots(&poles, &zeros, gain)
}

/// Direct-form recursion of `y(k) = sum a_j y(k-j) + g (x(k) + sum b_j x(k-j))`.
pub fn run_filter(ar: &[f64], ma: &[f64], gain: f64, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() {
        let mut acc = x[k];
        for (j, b) in ma.iter().enumerate() {
            if k > j {
                acc += b * x[k - j - 1];
            }
        }
        acc *= gain;
        for (j, a) in ar.iter().enumerate() {
            if k > j {
                acc += a * y[k - j - 1];
            }
        }
        y[k] = acc;
    }
    y
}

pub fn impulse(model: &ArmaModel, len: usize) -> Vec<f64> {
    let mut x = vec![0.0; len];
    if len > 0 {
        x[0] = 1.0;
    }
    run_filter(model.ar(), model.ma(), model.gain(), &x)
}

/// `Sigma = H H^T` with `H` the lower Toeplitz matrix of the impulse response.
pub fn covariance(noise: &ArmaModel, dim: usize) -> DMatrix<f64> {
    let h = impulse(noise, dim);
    let hm = DMatrix::from_fn(dim, dim, |i, j| if i >= j { h[i - j] } else { 0.0 });
    &hm * hm.transpose()
}

/// Lower Cholesky factor by nalgebra's factorization.
pub fn cholesky(sigma: DMatrix<f64>) -> DMatrix<f64> {
    sigma.cholesky().expect("covariance is positive definite").l()
}

pub fn solve_lower(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let v = nalgebra::DVector::from_column_slice(b);
    l.solve_lower_triangular(&v).expect("nonsingular").as_slice().to_vec()
}
