//! Deterministic-equivalent SNR of the double-IRS link and of the
//! single-IRS baseline.
//!
//! With `Phi_i = diag(s_i)` the effective deterministic equivalent is
//!
//! ```text
//! gamma_eff = gamma0 * ( beta_12 tr(R_t1 Phi1 R1 Phi1^H) tr(R_2r Phi2^H R2 Phi2)
//!                      + tr(R_t1 Phi1 R_1r Phi1^H)
//!                      + tr(R_t2 Phi2 R_2r Phi2^H) )
//! ```
//!
//! which is also the exact mean of the instantaneous SNR for any finite
//! surface sizes. The normalized value divides by `N1 N2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationMatrix, LinkCovarianceSet};
use crate::error::{Error, Result};

/// Allowed deviation of a phase entry's modulus from 1.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Checks that every entry of `s` has unit modulus.
pub fn check_unit_modulus(s: &DVector<Complex64>) -> Result<()> {
    for (index, z) in s.iter().enumerate() {
        let modulus = z.norm();
        if !((modulus - 1.0).abs() <= UNIT_MODULUS_TOL) {
            return Err(Error::NotUnitModulus { index, modulus });
        }
    }
    Ok(())
}

/// `exp(j theta)` for every angle.
pub fn phases_from_angles(angles: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(angles.len(), angles.iter().map(|&t| Complex64::from_polar(1.0, t)))
}

/// Uniformly random unit-modulus vector.
pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// Reflection coefficients of both surfaces (the diagonals of `Phi1`, `Phi2`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    phases_1: DVector<Complex64>,
    phases_2: DVector<Complex64>,
}

impl PhaseConfig {
    pub fn new(phases_1: DVector<Complex64>, phases_2: DVector<Complex64>) -> Result<Self> {
        check_unit_modulus(&phases_1)?;
        check_unit_modulus(&phases_2)?;
        Ok(PhaseConfig { phases_1, phases_2 })
    }

    /// All reflection coefficients equal to 1.
    pub fn ones(n1: usize, n2: usize) -> Self {
        PhaseConfig {
            phases_1: DVector::from_element(n1, Complex64::new(1.0, 0.0)),
            phases_2: DVector::from_element(n2, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn random<R: Rng + ?Sized>(n1: usize, n2: usize, rng: &mut R) -> Self {
        PhaseConfig { phases_1: random_phases(n1, rng), phases_2: random_phases(n2, rng) }
    }

    pub fn from_angles(theta_1: &[f64], theta_2: &[f64]) -> Self {
        PhaseConfig { phases_1: phases_from_angles(theta_1), phases_2: phases_from_angles(theta_2) }
    }

    pub fn phases_1(&self) -> &DVector<Complex64> {
        &self.phases_1
    }

    pub fn phases_2(&self) -> &DVector<Complex64> {
        &self.phases_2
    }

    /// Replaces the coefficients of surface `which` (1 or 2).
    pub fn with_block(&self, which: IrsIndex, s: DVector<Complex64>) -> Result<Self> {
        check_unit_modulus(&s)?;
        let mut out = self.clone();
        match which {
            IrsIndex::One => {
                if s.len() != out.phases_1.len() {
                    return Err(Error::DimensionMismatch { expected: out.phases_1.len(), found: s.len() });
                }
                out.phases_1 = s;
            }
            IrsIndex::Two => {
                if s.len() != out.phases_2.len() {
                    return Err(Error::DimensionMismatch { expected: out.phases_2.len(), found: s.len() });
                }
                out.phases_2 = s;
            }
        }
        Ok(out)
    }

    pub fn block(&self, which: IrsIndex) -> &DVector<Complex64> {
        match which {
            IrsIndex::One => &self.phases_1,
            IrsIndex::Two => &self.phases_2,
        }
    }

    /// Phase angles in `(-pi, pi]`.
    pub fn angles(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.phases_1.iter().map(|z| z.arg()).collect(),
            self.phases_2.iter().map(|z| z.arg()).collect(),
        )
    }
}

/// Selects one of the two surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrsIndex {
    One,
    Two,
}

impl IrsIndex {
    pub fn other(self) -> IrsIndex {
        match self {
            IrsIndex::One => IrsIndex::Two,
            IrsIndex::Two => IrsIndex::One,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            IrsIndex::One => 1,
            IrsIndex::Two => 2,
        }
    }
}

/// Deterministic-equivalent SNR and its additive parts (all linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeSnr {
    /// `gamma0 * (term_double + term_single_1 + term_single_2)`.
    pub value: f64,
    /// `value / (N1 N2)` for the double link, `value / N` for the baseline.
    pub normalized_value: f64,
    pub term_double: f64,
    pub term_single_1: f64,
    pub term_single_2: f64,
    pub gamma0: f64,
}

fn check_dims(m: &DMatrix<Complex64>, n: usize) -> Result<()> {
    if m.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
    }
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    Ok(())
}

/// `tr(A diag(s) B diag(s)^H)` evaluated entrywise in `O(N^2)`.
pub fn trace_quadratic(a: &CorrelationMatrix, s: &DVector<Complex64>, b: &CorrelationMatrix) -> Result<Complex64> {
    let n = s.len();
    check_dims(a.matrix(), n)?;
    check_dims(b.matrix(), n)?;
    Ok(trace_quadratic_raw(a.matrix(), s, b.matrix()))
}

pub(crate) fn trace_quadratic_raw(a: &DMatrix<Complex64>, s: &DVector<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = s.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for k in 0..n {
            row += a[(m, k)] * s[k] * b[(k, m)];
        }
        acc += row * s[m].conj();
    }
    acc
}

/// `diag(A diag(s) B)`, the derivative of `tr(A Phi B Phi^H)` with respect
/// to `s^*`.
pub fn diag_product(a: &CorrelationMatrix, s: &DVector<Complex64>, b: &CorrelationMatrix) -> Result<DVector<Complex64>> {
    let n = s.len();
    check_dims(a.matrix(), n)?;
    check_dims(b.matrix(), n)?;
    Ok(diag_product_raw(a.matrix(), s, b.matrix()))
}

pub(crate) fn diag_product_raw(a: &DMatrix<Complex64>, s: &DVector<Complex64>, b: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = s.len();
    DVector::from_fn(n, |m, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += a[(m, k)] * s[k] * b[(k, m)];
        }
        acc
    })
}

/// The four traces the double-link deterministic equivalent is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleTraces {
    /// `tr(R_t1 Phi1 R1 Phi1^H)`
    pub cascade_1: f64,
    /// `tr(R_2r Phi2^H R2 Phi2)`
    pub cascade_2: f64,
    /// `tr(R_t1 Phi1 R_1r Phi1^H)`
    pub single_1: f64,
    /// `tr(R_t2 Phi2 R_2r Phi2^H)`
    pub single_2: f64,
}

impl DoubleTraces {
    pub fn compute(cov: &LinkCovarianceSet, phases: &PhaseConfig) -> Result<Self> {
        let (n1, n2) = (cov.n1(), cov.n2());
        if phases.phases_1.len() != n1 {
            return Err(Error::DimensionMismatch { expected: n1, found: phases.phases_1.len() });
        }
        if phases.phases_2.len() != n2 {
            return Err(Error::DimensionMismatch { expected: n2, found: phases.phases_2.len() });
        }
        let s1 = &phases.phases_1;
        let s2c = phases.phases_2.map(|z| z.conj());
        Ok(DoubleTraces {
            cascade_1: trace_quadratic_raw(cov.r_t1().matrix(), s1, cov.r1().matrix()).re,
            cascade_2: trace_quadratic_raw(cov.r_2r().matrix(), &s2c, cov.r2().matrix()).re,
            single_1: trace_quadratic_raw(cov.r_t1().matrix(), s1, cov.r_1r().matrix()).re,
            single_2: trace_quadratic_raw(cov.r_t2().matrix(), &phases.phases_2, cov.r_2r().matrix()).re,
        })
    }

    pub fn de_snr(&self, beta_12: f64, gamma0: f64, n1: usize, n2: usize) -> DeSnr {
        let term_double = beta_12 * self.cascade_1 * self.cascade_2;
        let value = gamma0 * (term_double + self.single_1 + self.single_2);
        DeSnr {
            value,
            normalized_value: value / (n1 * n2) as f64,
            term_double,
            term_single_1: self.single_1,
            term_single_2: self.single_2,
            gamma0,
        }
    }
}

/// Deterministic-equivalent SNR of the double-IRS link.
pub fn de_snr_double(cov: &LinkCovarianceSet, phases: &PhaseConfig, gamma0: f64) -> Result<DeSnr> {
    check_unit_modulus(&phases.phases_1)?;
    check_unit_modulus(&phases.phases_2)?;
    Ok(DoubleTraces::compute(cov, phases)?.de_snr(cov.beta_12(), gamma0, cov.n1(), cov.n2()))
}

/// Deterministic-equivalent SNR `gamma0 tr(Rt Phi Rr Phi^H)` of a single surface.
pub fn de_snr_single(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    phases: &DVector<Complex64>,
    gamma0: f64,
) -> Result<DeSnr> {
    check_unit_modulus(phases)?;
    let t = trace_quadratic(r_t, phases, r_r)?.re;
    let value = gamma0 * t;
    Ok(DeSnr {
        value,
        normalized_value: value / phases.len() as f64,
        term_double: 0.0,
        term_single_1: t,
        term_single_2: 0.0,
        gamma0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::LinkGains;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> CorrelationMatrix {
        let x = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        CorrelationMatrix::new(&x * x.adjoint()).unwrap()
    }

    /// Dense reference: explicit matrix products.
    fn trace_dense(a: &CorrelationMatrix, s: &DVector<Complex64>, b: &CorrelationMatrix) -> Complex64 {
        let phi = DMatrix::from_diagonal(s);
        (a.matrix() * &phi * b.matrix() * phi.adjoint()).trace()
    }

    #[test]
    fn trace_kernel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let id = CorrelationMatrix::scaled_identity(5, 1.0);
        let s = random_phases(5, &mut rng);
        assert!((trace_quadratic(&id, &s, &id).unwrap() - Complex64::new(5.0, 0.0)).norm() < 1e-14);

        let a = random_psd(6, &mut rng);
        let b = random_psd(6, &mut rng);
        let ones = DVector::from_element(6, Complex64::new(1.0, 0.0));
        let ab = (a.matrix() * b.matrix()).trace();
        assert!((trace_quadratic(&a, &ones, &b).unwrap() - ab).norm() < 1e-12 * ab.norm());

        let s = random_phases(6, &mut rng);
        let rot = s.map(|z| z * Complex64::from_polar(1.0, 0.7));
        let t0 = trace_quadratic(&a, &s, &b).unwrap();
        let t1 = trace_quadratic(&a, &rot, &b).unwrap();
        assert!((t0 - t1).norm() < 1e-12 * t0.norm());
        assert!((t0 - trace_dense(&a, &s, &b)).norm() < 1e-12 * t0.norm());
        assert!(t0.im.abs() < 1e-10 * t0.re.abs());
    }

    #[test]
    fn trace_kernel_dimension_mismatch() {
        let a = CorrelationMatrix::scaled_identity(3, 1.0);
        let s = DVector::from_element(4, Complex64::new(1.0, 0.0));
        assert!(matches!(trace_quadratic(&a, &s, &a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn scalar_double_link() {
        let (r1, r2) = (0.7, 1.3);
        let g = LinkGains { t1: 0.5, l12: 0.2, l2r: 0.9, l1r: 0.3, t2: 0.4 };
        let cov = LinkCovarianceSet::new(
            CorrelationMatrix::scaled_identity(1, r1),
            CorrelationMatrix::scaled_identity(1, r2),
            g,
        )
        .unwrap();
        let gamma0 = 3.0;
        let de = de_snr_double(&cov, &PhaseConfig::ones(1, 1), gamma0).unwrap();
        let (rt1, r1r, r2r, rt2) = (g.t1 * r1, g.l1r * r1, g.l2r * r2, g.t2 * r2);
        let want = gamma0 * (g.l12 * rt1 * r1 * r2r * r2 + rt1 * r1r + rt2 * r2r);
        assert!((de.value - want).abs() < 1e-14 * want);
        assert_eq!(de.normalized_value, de.value);
    }

    #[test]
    fn uncorrelated_is_phase_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = LinkGains { t1: 0.5, l12: 0.2, l2r: 0.9, l1r: 0.3, t2: 0.4 };
        let cov = LinkCovarianceSet::new(
            CorrelationMatrix::scaled_identity(6, 0.3),
            CorrelationMatrix::scaled_identity(4, 0.8),
            g,
        )
        .unwrap();
        let a = de_snr_double(&cov, &PhaseConfig::random(6, 4, &mut rng), 7.0).unwrap();
        let b = de_snr_double(&cov, &PhaseConfig::random(6, 4, &mut rng), 7.0).unwrap();
        assert!((a.value - b.value).abs() <= 1e-14 * a.value);

        let s1 = random_phases(6, &mut rng);
        let s2 = random_phases(6, &mut rng);
        let rt = CorrelationMatrix::scaled_identity(6, 0.2);
        let a = de_snr_single(&rt, &rt, &s1, 2.0).unwrap();
        let b = de_snr_single(&rt, &rt, &s2, 2.0).unwrap();
        assert!((a.value - b.value).abs() <= 1e-14 * a.value);
    }

    #[test]
    fn single_scalar() {
        let rt = CorrelationMatrix::scaled_identity(1, 0.25);
        let rr = CorrelationMatrix::scaled_identity(1, 4.0);
        let s = phases_from_angles(&[1.1]);
        let de = de_snr_single(&rt, &rr, &s, 5.0).unwrap();
        assert!((de.value - 5.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_phases() {
        let s = DVector::from_element(2, Complex64::new(1.1, 0.0));
        assert!(matches!(check_unit_modulus(&s), Err(Error::NotUnitModulus { index: 0, .. })));
        assert!(PhaseConfig::new(s.clone(), s).is_err());
        let cov = LinkCovarianceSet::new(
            CorrelationMatrix::scaled_identity(2, 1.0),
            CorrelationMatrix::scaled_identity(3, 1.0),
            LinkGains { t1: 1.0, l12: 1.0, l2r: 1.0, l1r: 1.0, t2: 1.0 },
        )
        .unwrap();
        assert!(matches!(
            de_snr_double(&cov, &PhaseConfig::ones(3, 2), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn global_phase_invariance(seed in any::<u64>(), phi in -3.2f64..3.2, psi in -3.2f64..3.2) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (n1, n2) = (5, 3);
                let g = LinkGains { t1: 0.5, l12: 0.2, l2r: 0.9, l1r: 0.3, t2: 0.4 };
                let cov = LinkCovarianceSet::new(random_psd(n1, &mut rng), random_psd(n2, &mut rng), g).unwrap();
                let p = PhaseConfig::random(n1, n2, &mut rng);
                let q = PhaseConfig::new(
                    p.phases_1().map(|z| z * Complex64::from_polar(1.0, phi)),
                    p.phases_2().map(|z| z * Complex64::from_polar(1.0, psi)),
                ).unwrap();
                let a = de_snr_double(&cov, &p, 2.0).unwrap();
                let b = de_snr_double(&cov, &q, 2.0).unwrap();
                prop_assert!((a.value - b.value).abs() <= 1e-12 * a.value);
            }

            #[test]
            fn additivity_and_homogeneity(seed in any::<u64>(), c in 0.01f64..100.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = LinkGains { t1: 0.5, l12: 0.2, l2r: 0.9, l1r: 0.3, t2: 0.4 };
                let r1 = random_psd(4, &mut rng);
                let r2 = random_psd(6, &mut rng);
                let p = PhaseConfig::random(4, 6, &mut rng);
                let a = de_snr_double(&LinkCovarianceSet::new(r1.clone(), r2.clone(), g).unwrap(), &p, 1.5).unwrap();
                let b = de_snr_double(&LinkCovarianceSet::new(r1, r2, g.scaled(c)).unwrap(), &p, 1.5).unwrap();
                let sum = 1.5 * (a.term_double + a.term_single_1 + a.term_single_2);
                prop_assert!((a.value - sum).abs() <= 1e-14 * a.value);
                prop_assert!((b.term_single_1 - c * c * a.term_single_1).abs() <= 1e-12 * b.term_single_1.abs());
                prop_assert!((b.term_single_2 - c * c * a.term_single_2).abs() <= 1e-12 * b.term_single_2.abs());
                prop_assert!((b.term_double - c.powi(3) * a.term_double).abs() <= 1e-12 * b.term_double.abs());
                prop_assert!(a.value >= 0.0);
            }
        }
    }
}
