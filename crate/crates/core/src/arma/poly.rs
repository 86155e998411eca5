//! Polynomials in `w = z^-1` written as `1 + c[0] w + ... + c[n-1] w^n`.
//!
//! Roots are reported in the reciprocal form used by transfer functions:
//! `1 + sum c[j-1] w^j = prod (1 - r_j w)`, so the `r_j` are the roots in `z`
//! of the monic polynomial `z^n + c[0] z^(n-1) + ... + c[n-1]`. They are the
//! eigenvalues of its companion matrix.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;
const NEWTON_STEPS: usize = 3;

/// Returns `r_j` with `1 + sum_j c[j-1] w^j = prod_j (1 - r_j w)`.
///
/// Trailing zero coefficients are dropped first (a root at the origin
/// contributes the factor `1`). Complex roots come in exact conjugate pairs.
pub fn reciprocal_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    let c = &coeffs[..n];
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![Complex64::new(-c[0], 0.0)]),
        _ => {}
    }

    let mut companion = DMatrix::<f64>::zeros(n, n);
    for (j, &cj) in c.iter().enumerate() {
        companion[(0, j)] = -cj;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::RootFinding { coeffs: coeffs.to_vec() })?;
    let eig = schur.complex_eigenvalues();

    let scale = 1.0 + c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let snap = 64.0 * f64::EPSILON * scale;
    let mut roots = Vec::with_capacity(n);
    for &z in eig.iter() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::RootFinding { coeffs: coeffs.to_vec() });
        }
        if z.im.abs() <= snap {
            roots.push(polish(c, Complex64::new(z.re, 0.0)));
        } else if z.im > 0.0 {
            let r = polish(c, z);
            roots.push(r);
            roots.push(r.conj());
        }
    }
    if roots.len() != n {
        // Schur produced an unpaired complex value; keep the raw eigenvalues.
        roots = eig.iter().copied().collect();
    }
    Ok(roots)
}

fn eval_monic(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &cj in c {
        dp = dp * z + p;
        p = p * z + cj;
    }
    (p, dp)
}

// Newton refinement that only accepts steps reducing the residual, so it
// never jumps to a neighbouring root.
fn polish(c: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = eval_monic(c, z);
    for _ in 0..NEWTON_STEPS {
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if (next - z).norm() > 1e-6 * z.norm().max(1.0) {
            break;
        }
        let (pn, dpn) = eval_monic(c, next);
        if pn.norm() >= p.norm() {
            break;
        }
        z = next;
        p = pn;
        dp = dpn;
    }
    z
}

/// Coefficients `[1, c1, ..., cn]` of `prod_j (1 - r_j w)`.
pub fn expand_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        coeffs.push(Complex64::new(0.0, 0.0));
        for j in (1..coeffs.len()).rev() {
            let prev = coeffs[j - 1];
            coeffs[j] -= r * prev;
        }
    }
    coeffs
}

/// Evaluates `sum_j coeffs[j] w^j`.
#[cfg(test)]
pub(crate) fn eval_poly(coeffs: &[Complex64], w: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn linear_factor() {
        // 1 + 0.3 w = 1 - (-0.3) w
        let r = reciprocal_roots(&[0.3]).unwrap();
        assert_eq!(r, vec![Complex64::new(-0.3, 0.0)]);
    }

    #[test]
    fn trailing_zeros_dropped() {
        let r = reciprocal_roots(&[-0.5, 0.0, 0.0]).unwrap();
        assert_eq!(r, vec![Complex64::new(0.5, 0.0)]);
        assert!(reciprocal_roots(&[0.0, 0.0]).unwrap().is_empty());
    }

    #[test]
    fn conjugate_pair() {
        // (1 - (0.5+0.5i) w)(1 - (0.5-0.5i) w) = 1 - w + 0.5 w^2
        let r = sorted(reciprocal_roots(&[-1.0, 0.5]).unwrap());
        assert!((r[0] - Complex64::new(0.5, -0.5)).norm() < 1e-14);
        assert!((r[1] - Complex64::new(0.5, 0.5)).norm() < 1e-14);
        assert_eq!(r[0], r[1].conj());
    }

    #[test]
    fn roots_round_trip_through_expansion() {
        let roots = vec![
            Complex64::new(0.9, 0.0),
            Complex64::new(-0.4, 0.3),
            Complex64::new(-0.4, -0.3),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.2, 0.7),
            Complex64::new(0.2, -0.7),
        ];
        let coeffs = expand_from_roots(&roots);
        assert!(coeffs.iter().all(|c| c.im.abs() < 1e-15));
        let real: Vec<f64> = coeffs[1..].iter().map(|c| c.re).collect();
        let back = sorted(reciprocal_roots(&real).unwrap());
        for (a, b) in back.iter().zip(sorted(roots).iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_root_is_exact() {
        let r = reciprocal_roots(&[-1.0]).unwrap();
        assert_eq!(r[0], Complex64::new(1.0, 0.0));
    }
}
