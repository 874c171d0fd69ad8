//! Closed-form coverage probability.
//!
//! The constant 1 in `Pr(gamma > tau)` is replaced by a unit-mean gamma
//! variable of shape `M`, and Alzer's inequality bounds its CDF, giving
//!
//! ```text
//! P_c = 1 - (1 - exp(-eta tau / gamma_eff))^M,   eta = M (M!)^(-1/M)
//!     = sum_{n=1}^{M} C(M, n) (-1)^(n+1) exp(-n eta tau / gamma_eff).
//! ```
//!
//! The product form is evaluated in log space and is the one used
//! everywhere; the alternating sum exists to cross-check it.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::correlation::LinkCovarianceSet;
use crate::de::{de_snr_double, PhaseConfig};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Default number of terms in the gamma approximation.
pub const DEFAULT_M_TERMS: u32 = 10;

/// Largest `M` accepted by [`coverage_binomial_sum`].
pub const MAX_BINOMIAL_TERMS: u32 = 60;

/// `eta = M (M!)^(-1/M)`, computed through the log-gamma function.
pub fn alzer_eta(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("number of terms M must be at least 1".into()));
    }
    let m = f64::from(m);
    Ok(m * (-ln_gamma(m + 1.0) / m).exp())
}

/// Number of approximation terms together with its `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlzerParams {
    pub m_terms: u32,
    pub eta: f64,
}

impl AlzerParams {
    pub fn new(m_terms: u32) -> Result<Self> {
        Ok(AlzerParams { m_terms, eta: alzer_eta(m_terms)? })
    }

    /// Coverage at normalized threshold `x = tau / gamma_eff` (product form).
    pub fn coverage_at(&self, x: f64) -> f64 {
        let e = (-self.eta * x).exp();
        // 1 - (1 - e)^M with (1 - e)^M = exp(M ln(1 - e))
        let log_miss = f64::from(self.m_terms) * (-e).ln_1p();
        (-log_miss.exp_m1()).clamp(0.0, 1.0)
    }

    /// Normalized threshold `x = tau / gamma_eff` at which coverage equals `p`.
    pub fn normalized_threshold(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("target coverage must lie in (0, 1), got {p}")));
        }
        // (1 - e)^M = 1 - p
        let e = -((1.0 - p).ln() / f64::from(self.m_terms)).exp_m1();
        Ok(-e.ln() / self.eta)
    }

    /// `dP_c / d gamma_eff` at threshold `tau`.
    pub fn slope(&self, tau: f64, gamma_eff: f64) -> f64 {
        if tau == 0.0 {
            return 0.0;
        }
        let x = tau / gamma_eff;
        let e = (-self.eta * x).exp();
        let m = f64::from(self.m_terms);
        let miss = if self.m_terms == 1 { 1.0 } else { ((m - 1.0) * (-e).ln_1p()).exp() };
        m * miss * e * self.eta * tau / (gamma_eff * gamma_eff)
    }
}

fn check_inputs(tau: f64, de_snr_eff: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("threshold must be non-negative, got {tau}")));
    }
    if !(de_snr_eff > 0.0) {
        return Err(Error::Domain(format!("DE SNR must be positive, got {de_snr_eff}")));
    }
    Ok(())
}

/// `1 - (1 - exp(-eta tau / gamma_eff))^M`.
pub fn coverage_closed_form(tau: f64, de_snr_eff: f64, m: u32) -> Result<f64> {
    check_inputs(tau, de_snr_eff)?;
    if de_snr_eff.is_infinite() {
        return Ok(1.0);
    }
    Ok(AlzerParams::new(m)?.coverage_at(tau / de_snr_eff))
}

/// Double-double accumulator. The alternating sum cancels terms as large as
/// `C(M, M/2)`, so it is accumulated with about 32 significant digits.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        let lo = err + self.lo + o.lo;
        let hi = s + lo;
        Dd { hi, lo: lo - (hi - s) }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        let hi = p + err;
        Dd { hi, lo: err - (hi - p) }
    }

    fn scale(self, c: f64) -> Dd {
        self.mul(Dd::new(c))
    }
}

/// `sum_{n=1}^{M} C(M, n) (-1)^(n+1) w(n) e^n` in double-double.
fn alternating_sum(m: u32, e: f64, weight: impl Fn(u32) -> f64) -> f64 {
    let e = Dd::new(e);
    let mut power = Dd::new(1.0);
    let mut binom = 1.0f64;
    let mut sum = Dd::new(0.0);
    for n in 1..=m {
        // exact integers for M <= 60
        binom = (binom * f64::from(m - n + 1) / f64::from(n)).round();
        power = power.mul(e);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        sum = sum.add(power.scale(sign * binom).scale(weight(n)));
    }
    sum.hi + sum.lo
}

/// Alternating binomial sum form of the coverage probability.
pub fn coverage_binomial_sum(tau: f64, de_snr_eff: f64, m: u32) -> Result<f64> {
    check_inputs(tau, de_snr_eff)?;
    if m > MAX_BINOMIAL_TERMS {
        return Err(Error::Range(format!(
            "alternating sum is unstable for M = {m} > {MAX_BINOMIAL_TERMS}"
        )));
    }
    let params = AlzerParams::new(m)?;
    let e = (-params.eta * tau / de_snr_eff).exp();
    Ok(alternating_sum(m, e, |_| 1.0))
}

/// `dP_c / d gamma_eff` as the term-by-term derivative of the binomial sum.
pub fn coverage_slope_binomial(tau: f64, de_snr_eff: f64, m: u32) -> Result<f64> {
    check_inputs(tau, de_snr_eff)?;
    if m > MAX_BINOMIAL_TERMS {
        return Err(Error::Range(format!("M = {m} > {MAX_BINOMIAL_TERMS}")));
    }
    let eta = alzer_eta(m)?;
    let e = (-eta * tau / de_snr_eff).exp();
    let scale = eta * tau / (de_snr_eff * de_snr_eff);
    Ok(scale * alternating_sum(m, e, f64::from))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    /// Threshold as given (rate or SNR depending on the scenario mode).
    pub threshold: f64,
    /// Linear SNR threshold `tau`.
    pub threshold_snr: f64,
    /// Effective DE SNR.
    pub de_snr: f64,
    pub p_coverage: f64,
}

/// Analytic coverage at each threshold for fixed phases.
pub fn coverage_curve(
    scenario: &Scenario,
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    thresholds: &[f64],
    m: u32,
) -> Result<Vec<CoveragePoint>> {
    if thresholds.is_empty() {
        return Err(Error::Domain("threshold list is empty".into()));
    }
    let de = de_snr_double(cov, phases, scenario.gamma0())?;
    thresholds
        .iter()
        .map(|&t| {
            let tau = scenario.tau(t)?;
            Ok(CoveragePoint {
                threshold: t,
                threshold_snr: tau,
                de_snr: de.value,
                p_coverage: coverage_closed_form(tau, de.value, m)?,
            })
        })
        .collect()
}
