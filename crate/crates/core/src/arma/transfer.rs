use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{expand_from_roots, reciprocal_roots};
use super::ArmaModel;
use crate::error::{AssumptionViolation, Error, Result};

/// `|pole - zero| < CANCELLATION_TOL * max(1, |pole|)` counts as a cancellation
/// (and the same test on two poles counts as a repeated pole).
pub const CANCELLATION_TOL: f64 = 1e-8;

/// The two largest pole moduli must differ by more than this.
pub const POLE_UNIQUENESS_TOL: f64 = 1e-8;

const UNIT_CIRCLE_SLACK: f64 = 1e-9;

/// `scale * prod (1 - zeros[j] z^-1) / prod (1 - poles[j] z^-1)`, optionally
/// with the residues of its partial-fraction expansion.
///
/// Factors with a root at the origin are identically `1` and are dropped on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTransferFunction {
    scale: f64,
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    residues: Vec<Complex64>,
}

fn coincide(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() < CANCELLATION_TOL * a.norm().max(1.0)
}

impl RationalTransferFunction {
    pub fn new(scale: f64, zeros: Vec<Complex64>, poles: Vec<Complex64>) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::NonFinite { context: "transfer function scale", value: scale });
        }
        for z in zeros.iter().chain(&poles) {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { context: "transfer function root", value: z.re + z.im });
            }
        }
        let nonzero = |v: Vec<Complex64>| v.into_iter().filter(|r| r.norm() != 0.0).collect();
        Ok(RationalTransferFunction {
            scale,
            zeros: nonzero(zeros),
            poles: nonzero(poles),
            residues: Vec::new(),
        })
    }

    /// The constant function `1`.
    pub fn identity() -> Self {
        RationalTransferFunction {
            scale: 1.0,
            zeros: Vec::new(),
            poles: Vec::new(),
            residues: Vec::new(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    /// Residue of `poles()[j]`; empty until [`partial_fractions`] ran.
    pub fn residues(&self) -> &[Complex64] {
        &self.residues
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.poles.len() > self.zeros.len()
    }

    /// Largest pole modulus, `0` without poles.
    pub fn spectral_radius(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Index of the pole with the largest modulus.
    pub fn dominant_pole_index(&self) -> Option<usize> {
        self.poles
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
    }

    /// Evaluates the function at `w = z^-1`.
    pub fn eval(&self, w: Complex64) -> Complex64 {
        let num: Complex64 = self.zeros.iter().map(|z| Complex64::new(1.0, 0.0) - z * w).product();
        let den: Complex64 = self.poles.iter().map(|p| Complex64::new(1.0, 0.0) - p * w).product();
        num / den * self.scale
    }

    /// Numerator coefficients in `w`, including the scale.
    pub fn numerator(&self) -> Vec<Complex64> {
        expand_from_roots(&self.zeros)
            .into_iter()
            .map(|c| c * self.scale)
            .collect()
    }

    /// Denominator coefficients in `w`, leading `1`.
    pub fn denominator(&self) -> Vec<Complex64> {
        expand_from_roots(&self.poles)
    }

    /// Zero–pole coincidences inside this function.
    pub fn check_cancellations(&self) -> Result<(), AssumptionViolation> {
        for &p in &self.poles {
            if let Some(&z) = self.zeros.iter().find(|&&z| coincide(p, z)) {
                return Err(AssumptionViolation::Cancellation { pole: p, zero: z });
            }
        }
        Ok(())
    }

    pub fn check_simple_poles(&self) -> Result<(), AssumptionViolation> {
        for (i, &a) in self.poles.iter().enumerate() {
            for &b in &self.poles[i + 1..] {
                if coincide(a, b) {
                    return Err(AssumptionViolation::RepeatedPole { first: a, second: b });
                }
            }
        }
        Ok(())
    }

    /// Every structural requirement placed on a whitened agent signal: no
    /// cancellations, simple poles, strictly proper, stable, and a unique
    /// pole of maximal modulus.
    pub fn check_assumptions(&self) -> Result<(), AssumptionViolation> {
        self.check_cancellations()?;
        self.check_simple_poles()?;
        if !self.is_strictly_proper() {
            return Err(AssumptionViolation::NotStrictlyProper {
                poles: self.poles.len(),
                zeros: self.zeros.len(),
            });
        }
        let mut by_modulus: Vec<Complex64> = self.poles.clone();
        by_modulus.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let top = by_modulus[0];
        if top.norm() > 1.0 + UNIT_CIRCLE_SLACK {
            return Err(AssumptionViolation::UnstablePole { pole: top, modulus: top.norm() });
        }
        if let Some(&second) = by_modulus.get(1) {
            if top.norm() - second.norm() <= POLE_UNIQUENESS_TOL {
                return Err(AssumptionViolation::NonUniqueDominantPole { first: top, second });
            }
        }
        Ok(())
    }

    /// `sum_j r_j p_j^k` for `k = 0..len`; needs residues.
    pub fn modal_response(&self, len: usize) -> Result<Vec<Complex64>> {
        if self.residues.len() != self.poles.len() {
            return Err(Error::Argument("residues not computed; run partial_fractions first".into()));
        }
        let mut powers: Vec<Complex64> = self.residues.clone();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(powers.iter().sum());
            for (pw, p) in powers.iter_mut().zip(&self.poles) {
                *pw *= p;
            }
        }
        Ok(out)
    }
}

/// Rational Z-transform of an ARMA model; residues are left empty.
pub fn transfer_function(model: &ArmaModel) -> Result<RationalTransferFunction> {
    let zeros = reciprocal_roots(model.ma())?;
    let neg_ar: Vec<f64> = model.ar().iter().map(|a| -a).collect();
    let poles = reciprocal_roots(&neg_ar)?;
    RationalTransferFunction::new(model.gain(), zeros, poles)
}

/// Product `f * g` in reduced form.
///
/// Each factor must be free of internal zero–pole coincidences. Zeros of
/// one factor that coincide with poles of the other cancel exactly (this is
/// how a whitening filter removes a signal mode shared with the noise). The
/// product must then satisfy [`RationalTransferFunction::check_assumptions`].
pub fn cascade(
    f: &RationalTransferFunction,
    g: &RationalTransferFunction,
) -> Result<RationalTransferFunction> {
    f.check_cancellations()?;
    g.check_cancellations()?;

    let mut zeros_f = f.zeros.clone();
    let mut zeros_g = g.zeros.clone();
    let mut poles_f = f.poles.clone();
    let mut poles_g = g.poles.clone();
    cancel_pairs(&mut zeros_f, &mut poles_g);
    cancel_pairs(&mut zeros_g, &mut poles_f);

    zeros_f.extend(zeros_g);
    poles_f.extend(poles_g);
    let out = RationalTransferFunction::new(f.scale * g.scale, zeros_f, poles_f)?;
    out.check_assumptions()?;
    Ok(out)
}

fn cancel_pairs(zeros: &mut Vec<Complex64>, poles: &mut Vec<Complex64>) {
    let mut i = 0;
    while i < zeros.len() {
        if let Some(j) = poles.iter().position(|&p| coincide(p, zeros[i])) {
            zeros.swap_remove(i);
            poles.swap_remove(j);
        } else {
            i += 1;
        }
    }
}

/// Populates residues `r_j = (1 - p_j z^-1) f(z^-1)` at `z = p_j`.
pub fn partial_fractions(f: &RationalTransferFunction) -> Result<RationalTransferFunction> {
    f.check_simple_poles()?;
    if !f.is_strictly_proper() {
        return Err(AssumptionViolation::NotStrictlyProper {
            poles: f.poles.len(),
            zeros: f.zeros.len(),
        }
        .into());
    }
    let one = Complex64::new(1.0, 0.0);
    let residues = f
        .poles
        .iter()
        .enumerate()
        .map(|(j, &pj)| {
            let inv = one / pj;
            let num: Complex64 = f.zeros.iter().map(|z| one - z * inv).product();
            let den: Complex64 = f
                .poles
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, p)| one - p * inv)
                .product();
            num / den * f.scale
        })
        .collect();
    Ok(RationalTransferFunction {
        residues,
        ..f.clone()
    })
}

/// Numerator `sum_j r_j prod_{l != j} (1 - p_l w)` rebuilt from residues.
#[cfg(test)]
pub(crate) fn numerator_from_residues(f: &RationalTransferFunction) -> Vec<Complex64> {
    let n = f.poles.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); n.max(1)];
    for (j, r) in f.residues.iter().enumerate() {
        let others: Vec<Complex64> = f
            .poles
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != j)
            .map(|(_, &p)| p)
            .collect();
        for (a, c) in acc.iter_mut().zip(expand_from_roots(&others)) {
            *a += r * c;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arma::{impulse_response, ArmaFilter};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn white_gain_has_no_roots() {
        let f = transfer_function(&ArmaModel::white(3.0).unwrap()).unwrap();
        assert_eq!(f.scale(), 3.0);
        assert!(f.zeros().is_empty() && f.poles().is_empty() && f.residues().is_empty());
    }

    #[test]
    fn unit_ar_coefficient_gives_pole_at_one() {
        let f = transfer_function(&ArmaModel::dc_level(1.0).unwrap()).unwrap();
        assert_eq!(f.poles(), &[c(1.0, 0.0)]);
        assert_eq!(f.spectral_radius(), 1.0);
    }

    #[test]
    fn denominator_one_plus_03() {
        // 1 - ar w = 1 + 0.3 w
        let f = transfer_function(&ArmaModel::new(vec![-0.3], vec![], 1.0).unwrap()).unwrap();
        assert!((f.poles()[0] - c(-0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dc_level_in_random_walk_noise() {
        let (a, sigma, b) = (1.0, 10.0, 0.37);
        let noise = ArmaModel::new(vec![1.0], vec![b], sigma).unwrap();
        let signal = ArmaModel::dc_level(a).unwrap();
        let inv = transfer_function(&noise.inverse()).unwrap();
        let sig = transfer_function(&signal).unwrap();
        let comp = cascade(&inv, &sig).unwrap();
        assert!(comp.zeros().is_empty());
        assert_eq!(comp.poles().len(), 1);
        assert!((comp.poles()[0] - c(-b, 0.0)).norm() < 1e-15);
        assert!((comp.scale() - a / sigma).abs() < 1e-15);

        let pf = partial_fractions(&comp).unwrap();
        assert!((pf.residues()[0] - c(a / sigma, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_is_neutral() {
        let f = RationalTransferFunction::new(2.0, vec![c(0.3, 0.0)], vec![c(0.5, 0.0), c(-0.2, 0.0)]).unwrap();
        let g = cascade(&RationalTransferFunction::identity(), &f).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn single_pole_residue_is_numerator() {
        let f = RationalTransferFunction::new(1.7, vec![], vec![c(0.4, 0.0)]).unwrap();
        let pf = partial_fractions(&f).unwrap();
        assert!((pf.residues()[0] - c(1.7, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_single_pole_factors_match_series_filtering() {
        let m1 = ArmaModel::new(vec![0.8], vec![], 1.0).unwrap();
        let m2 = ArmaModel::new(vec![-0.5], vec![], 2.0).unwrap();
        let f = cascade(&transfer_function(&m1).unwrap(), &transfer_function(&m2).unwrap()).unwrap();
        let f = partial_fractions(&f).unwrap();
        let modal = f.modal_response(200).unwrap();

        let mut first = ArmaFilter::new(m1);
        let mut second = ArmaFilter::new(m2);
        for (k, m) in modal.iter().enumerate() {
            let x = if k == 0 { 1.0 } else { 0.0 };
            let y = second.step(first.step(x).unwrap()).unwrap();
            assert!((m.re - y).abs() < 1e-10 && m.im.abs() < 1e-10);
        }
    }

    #[test]
    fn within_factor_cancellation_is_rejected() {
        let m = ArmaModel::new(vec![0.5], vec![-0.5], 1.0).unwrap();
        let f = transfer_function(&m).unwrap();
        let err = cascade(&f, &RationalTransferFunction::identity()).unwrap_err();
        assert!(matches!(err, Error::Assumption(AssumptionViolation::Cancellation { .. })), "{err}");
    }

    #[test]
    fn repeated_pole_after_cascade_is_rejected() {
        let m = transfer_function(&ArmaModel::new(vec![0.5], vec![], 1.0).unwrap()).unwrap();
        let err = cascade(&m, &m).unwrap_err();
        assert!(matches!(err, Error::Assumption(AssumptionViolation::RepeatedPole { .. })));
        assert!(matches!(
            partial_fractions(&RationalTransferFunction::new(1.0, vec![], vec![c(0.5, 0.0), c(0.5, 0.0)]).unwrap()),
            Err(Error::Assumption(AssumptionViolation::RepeatedPole { .. }))
        ));
    }

    #[test]
    fn improper_is_rejected() {
        let ma = transfer_function(&ArmaModel::new(vec![], vec![0.5], 1.0).unwrap()).unwrap();
        assert!(matches!(
            cascade(&ma, &RationalTransferFunction::identity()),
            Err(Error::Assumption(AssumptionViolation::NotStrictlyProper { .. }))
        ));
    }

    #[test]
    fn non_unique_dominant_pole_is_rejected() {
        let f = RationalTransferFunction::new(1.0, vec![], vec![c(0.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert!(matches!(
            cascade(&f, &RationalTransferFunction::identity()),
            Err(Error::Assumption(AssumptionViolation::NonUniqueDominantPole { .. }))
        ));
        // A complex pair always ties in modulus.
        let g = RationalTransferFunction::new(1.0, vec![], vec![c(0.3, 0.4), c(0.3, -0.4)]).unwrap();
        assert!(g.check_assumptions().is_err());
    }

    #[test]
    fn unstable_is_rejected() {
        let f = RationalTransferFunction::new(1.0, vec![], vec![c(1.2, 0.0)]).unwrap();
        assert!(matches!(f.check_assumptions(), Err(AssumptionViolation::UnstablePole { .. })));
    }

    #[test]
    fn arma21_impulse_matches_modal_form() {
        let m = ArmaModel::new(vec![0.5, 0.3], vec![0.4], 1.5).unwrap();
        let f = partial_fractions(&transfer_function(&m).unwrap()).unwrap();
        let modal = f.modal_response(101).unwrap();
        let h = impulse_response(&m, 101).unwrap();
        for (a, b) in modal.iter().zip(&h.samples) {
            assert!((a.re - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            assert!(a.im.abs() < 1e-10);
        }
    }

    #[test]
    fn three_pole_modal_form_matches_unrolling() {
        // Poles 0.9, 0.3 +- 0.6i; zero -0.7; all from real polynomials.
        let poles = [c(0.9, 0.0), c(0.3, 0.6), c(0.3, -0.6)];
        let den = expand_from_roots(&poles);
        let ar: Vec<f64> = den[1..].iter().map(|x| -x.re).collect();
        let m = ArmaModel::new(ar, vec![0.7], 0.8).unwrap();
        let f = partial_fractions(&transfer_function(&m).unwrap()).unwrap();
        let modal = f.modal_response(201).unwrap();
        let h = impulse_response(&m, 201).unwrap();
        for (a, b) in modal.iter().zip(&h.samples) {
            assert!((a.re - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn residues_round_trip_to_the_original_roots() {
        let m = ArmaModel::new(vec![0.2, 0.35, -0.1], vec![0.5, 0.06], 1.3).unwrap();
        let f = partial_fractions(&transfer_function(&m).unwrap()).unwrap();
        let num = numerator_from_residues(&f);
        // The rebuilt numerator is scale * prod(1 - z_j w); its roots are the zeros.
        assert!(num.iter().all(|x| x.im.abs() < 1e-12));
        let lead = num[0].re;
        assert!((lead - 1.3).abs() < 1e-12);
        let monic: Vec<f64> = num[1..].iter().map(|x| x.re / lead).collect();
        let trimmed: Vec<f64> = monic[..f.zeros().len()].to_vec();
        assert!(monic[f.zeros().len()..].iter().all(|x| x.abs() < 1e-12));
        let mut zeros = reciprocal_roots(&trimmed).unwrap();
        let mut orig = f.zeros().to_vec();
        let key = |a: &Complex64, b: &Complex64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        zeros.sort_by(key);
        orig.sort_by(key);
        for (a, b) in zeros.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
        for w in [c(0.3, 0.2), c(-0.6, 0.0)] {
            let den = super::super::poly::eval_poly(&f.denominator(), w);
            let rebuilt = super::super::poly::eval_poly(&num, w) / den;
            assert!((rebuilt - f.eval(w)).norm() < 1e-12);
        }
    }

    #[test]
    fn residues_rebuild_the_function() {
        let f = RationalTransferFunction::new(
            0.9,
            vec![c(-0.5, 0.0), c(0.2, 0.0)],
            vec![c(0.8, 0.0), c(0.1, 0.5), c(0.1, -0.5)],
        )
        .unwrap();
        let pf = partial_fractions(&f).unwrap();
        for w in [c(0.3, 0.1), c(-0.7, 0.0), c(0.05, -0.9)] {
            let sum: Complex64 = pf
                .residues()
                .iter()
                .zip(pf.poles())
                .map(|(r, p)| r / (Complex64::new(1.0, 0.0) - p * w))
                .sum();
            assert!((sum - f.eval(w)).norm() < 1e-12);
        }
    }
}
