//! Physical scenario: radio parameters, link geometry and path losses.
//!
//! All quantities handed to the other modules are linear-scale. The
//! scenario is read from a flat key-value TOML file; every key is optional
//! and falls back to the reference deployment (3 GHz carrier, 10 MHz,
//! 43 dBm transmit power, -94 dBm noise, Tx-IRS 1 at 1 m, IRS 1-IRS 2 at
//! 100 m, IRS 2-Rx at 15 m).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correlation::IrsGeometry;
use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power in dB (or dBm) to linear scale (or mW).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Distance-based path loss `10^(ref_gain_db/10) * distance^-exponent`.
pub fn pathloss_from_distance(distance: f64, exponent: f64, reference_gain_db: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!(
            "path-loss distance must be positive, got {distance}"
        )));
    }
    Ok(db_to_linear(reference_gain_db) * distance.powf(-exponent))
}

/// How a user-facing threshold maps to the SNR threshold `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// The threshold is already a linear SNR.
    SnrDirect,
    /// The threshold is a target spectral efficiency in b/s/Hz, `tau = 2^T - 1`.
    #[default]
    TargetRate,
}

impl ThresholdMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rate" | "target_rate" | "targetrate" => Some(ThresholdMode::TargetRate),
            "snr" | "snr_direct" | "snrdirect" => Some(ThresholdMode::SnrDirect),
            _ => None,
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::SnrDirect => f.write_str("snr"),
            ThresholdMode::TargetRate => f.write_str("rate"),
        }
    }
}

/// Maps a threshold to the linear SNR threshold used by the coverage formulas.
pub fn threshold_to_snr(threshold: f64, mode: ThresholdMode) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!(
            "threshold must be non-negative, got {threshold}"
        )));
    }
    Ok(match mode {
        ThresholdMode::SnrDirect => threshold,
        ThresholdMode::TargetRate => threshold.exp2() - 1.0,
    })
}

/// Inverse of [`threshold_to_snr`].
pub fn snr_to_threshold(tau: f64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::SnrDirect => tau,
        ThresholdMode::TargetRate => tau.ln_1p() / std::f64::consts::LN_2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub transmit_power_dbm: f64,
    pub noise_power_dbm: f64,
}

impl RadioParams {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Average transmit SNR `P / N0` in linear scale.
    pub fn gamma0(&self) -> f64 {
        db_to_linear(self.transmit_power_dbm - self.noise_power_dbm)
    }
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            carrier_frequency_hz: 3.0e9,
            bandwidth_hz: 10.0e6,
            transmit_power_dbm: 43.0,
            noise_power_dbm: -94.0,
        }
    }
}

/// Distance, exponent and intercept of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub exponent: f64,
    pub ref_gain_db: f64,
}

impl LinkBudget {
    pub fn gain(&self) -> Result<f64> {
        pathloss_from_distance(self.distance_m, self.exponent, self.ref_gain_db)
    }
}

/// Linear path-loss gains of the five links plus the budgets they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPathLoss {
    pub beta_t1: f64,
    pub beta_12: f64,
    pub beta_2r: f64,
    pub beta_1r: f64,
    pub beta_t2: f64,
    pub t1: LinkBudget,
    pub l12: LinkBudget,
    pub l2r: LinkBudget,
    pub l1r: LinkBudget,
    pub t2: LinkBudget,
}

impl LinkPathLoss {
    pub fn from_budgets(
        t1: LinkBudget,
        l12: LinkBudget,
        l2r: LinkBudget,
        l1r: LinkBudget,
        t2: LinkBudget,
    ) -> Result<Self> {
        Ok(LinkPathLoss {
            beta_t1: t1.gain()?,
            beta_12: l12.gain()?,
            beta_2r: l2r.gain()?,
            beta_1r: l1r.gain()?,
            beta_t2: t2.gain()?,
            t1,
            l12,
            l2r,
            l1r,
            t2,
        })
    }

    /// The five gains in the order (t1, 12, 2r, 1r, t2).
    pub fn betas(&self) -> [f64; 5] {
        [self.beta_t1, self.beta_12, self.beta_2r, self.beta_1r, self.beta_t2]
    }
}

/// A complete double-IRS deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub radio: RadioParams,
    pub pathloss: LinkPathLoss,
    pub irs1_geometry: IrsGeometry,
    pub irs2_geometry: IrsGeometry,
    pub threshold_mode: ThresholdMode,
    /// Element width and height as a fraction of the wavelength.
    pub element_spacing_over_lambda: f64,
}

impl Scenario {
    pub fn gamma0(&self) -> f64 {
        self.radio.gamma0()
    }

    pub fn wavelength(&self) -> f64 {
        self.radio.wavelength()
    }

    pub fn n1(&self) -> usize {
        self.irs1_geometry.len()
    }

    pub fn n2(&self) -> usize {
        self.irs2_geometry.len()
    }

    /// Total element budget `N = N1 + N2`.
    pub fn total_elements(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn tau(&self, threshold: f64) -> Result<f64> {
        threshold_to_snr(threshold, self.threshold_mode)
    }

    /// Same deployment with the element budget split as (`n1`, `n2`); both
    /// surfaces get near-square grids.
    pub fn with_split(&self, n1: usize, n2: usize) -> Result<Scenario> {
        let spacing = self.element_spacing_over_lambda * self.wavelength();
        let mut out = self.clone();
        out.irs1_geometry = IrsGeometry::near_square(n1, spacing, self.wavelength())?;
        out.irs2_geometry = IrsGeometry::near_square(n2, spacing, self.wavelength())?;
        Ok(out)
    }

    /// Same deployment with a different element size (both surfaces).
    pub fn with_spacing(&self, spacing_over_lambda: f64) -> Result<Scenario> {
        if !(spacing_over_lambda > 0.0) {
            return Err(Error::Domain(format!(
                "element spacing must be positive, got {spacing_over_lambda}"
            )));
        }
        let lambda = self.wavelength();
        let d = spacing_over_lambda * lambda;
        let mut out = self.clone();
        out.element_spacing_over_lambda = spacing_over_lambda;
        out.irs1_geometry = IrsGeometry::new(self.irs1_geometry.n_h, self.irs1_geometry.n_v, d, d, lambda)?;
        out.irs2_geometry = IrsGeometry::new(self.irs2_geometry.n_h, self.irs2_geometry.n_v, d, d, lambda)?;
        Ok(out)
    }

    /// Path losses of the single-IRS baseline `(beta_t, beta_r)`.
    ///
    /// The baseline surface sits where IRS 2 is: the Tx link spans the
    /// inter-IRS gap (Tx-IRS 2 budget) and the Rx link is the IRS 2-Rx link.
    pub fn baseline_pathloss(&self) -> (f64, f64) {
        (self.pathloss.beta_t2, self.pathloss.beta_2r)
    }

    /// Geometry of a single surface holding all `n` elements.
    pub fn baseline_geometry(&self, n: usize) -> Result<IrsGeometry> {
        let lambda = self.wavelength();
        IrsGeometry::near_square(n, self.element_spacing_over_lambda * lambda, lambda)
    }
}

impl Default for Scenario {
    fn default() -> Self {
        ScenarioConfig::default()
            .build()
            .expect("reference scenario is valid")
    }
}

/// Flat key-value configuration. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub carrier_hz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub r_t1_m: Option<f64>,
    pub r_12_m: Option<f64>,
    pub r_2r_m: Option<f64>,
    pub r_1r_m: Option<f64>,
    pub r_t2_m: Option<f64>,
    pub alpha_t1: Option<f64>,
    pub alpha_12: Option<f64>,
    pub alpha_2r: Option<f64>,
    pub alpha_1r: Option<f64>,
    pub alpha_t2: Option<f64>,
    pub ref_gain_db: Option<f64>,
    pub ref_gain_t1_db: Option<f64>,
    pub ref_gain_12_db: Option<f64>,
    pub ref_gain_2r_db: Option<f64>,
    pub ref_gain_1r_db: Option<f64>,
    pub ref_gain_t2_db: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub n_h1: Option<usize>,
    pub n_h2: Option<usize>,
    pub element_spacing_over_lambda: Option<f64>,
    pub threshold_mode: Option<ThresholdMode>,
}

const KNOWN_KEYS: &[&str] = &[
    "carrier_hz",
    "bandwidth_hz",
    "tx_power_dbm",
    "noise_dbm",
    "r_t1_m",
    "r_12_m",
    "r_2r_m",
    "r_1r_m",
    "r_t2_m",
    "alpha_t1",
    "alpha_12",
    "alpha_2r",
    "alpha_1r",
    "alpha_t2",
    "ref_gain_db",
    "ref_gain_t1_db",
    "ref_gain_12_db",
    "ref_gain_2r_db",
    "ref_gain_1r_db",
    "ref_gain_t2_db",
    "n1",
    "n2",
    "n_h1",
    "n_h2",
    "element_spacing_over_lambda",
    "threshold_mode",
];

fn number(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(key, format!("expected a number, found {}", other.type_str()))),
    }
}

fn count(key: &str, value: &toml::Value) -> Result<usize> {
    match value {
        toml::Value::Integer(i) if *i >= 1 => Ok(*i as usize),
        toml::Value::Integer(i) => Err(Error::config(key, format!("must be at least 1, got {i}"))),
        other => Err(Error::config(key, format!("expected an integer, found {}", other.type_str()))),
    }
}

fn positive(key: &str, value: Option<f64>, default: f64) -> Result<f64> {
    let v = value.unwrap_or(default);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn exponent(key: &str, value: Option<f64>, default: f64) -> Result<f64> {
    let v = value.unwrap_or(default);
    if v >= 2.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("path-loss exponent must be >= 2, got {v}")))
    }
}

impl ScenarioConfig {
    /// Parses the flat key-value text. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        let mut cfg = ScenarioConfig::default();
        for (key, value) in &table {
            let k = key.as_str();
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::config(k, "unknown key"));
            }
            match k {
                "n1" => cfg.n1 = Some(count(k, value)?),
                "n2" => cfg.n2 = Some(count(k, value)?),
                "n_h1" => cfg.n_h1 = Some(count(k, value)?),
                "n_h2" => cfg.n_h2 = Some(count(k, value)?),
                "threshold_mode" => {
                    let s = value
                        .as_str()
                        .ok_or_else(|| Error::config(k, "expected a string"))?;
                    cfg.threshold_mode = Some(
                        ThresholdMode::parse(s)
                            .ok_or_else(|| Error::config(k, format!("unknown mode `{s}`")))?,
                    );
                }
                _ => {
                    let x = number(k, value)?;
                    let slot = match k {
                        "carrier_hz" => &mut cfg.carrier_hz,
                        "bandwidth_hz" => &mut cfg.bandwidth_hz,
                        "tx_power_dbm" => &mut cfg.tx_power_dbm,
                        "noise_dbm" => &mut cfg.noise_dbm,
                        "r_t1_m" => &mut cfg.r_t1_m,
                        "r_12_m" => &mut cfg.r_12_m,
                        "r_2r_m" => &mut cfg.r_2r_m,
                        "r_1r_m" => &mut cfg.r_1r_m,
                        "r_t2_m" => &mut cfg.r_t2_m,
                        "alpha_t1" => &mut cfg.alpha_t1,
                        "alpha_12" => &mut cfg.alpha_12,
                        "alpha_2r" => &mut cfg.alpha_2r,
                        "alpha_1r" => &mut cfg.alpha_1r,
                        "alpha_t2" => &mut cfg.alpha_t2,
                        "ref_gain_db" => &mut cfg.ref_gain_db,
                        "ref_gain_t1_db" => &mut cfg.ref_gain_t1_db,
                        "ref_gain_12_db" => &mut cfg.ref_gain_12_db,
                        "ref_gain_2r_db" => &mut cfg.ref_gain_2r_db,
                        "ref_gain_1r_db" => &mut cfg.ref_gain_1r_db,
                        "ref_gain_t2_db" => &mut cfg.ref_gain_t2_db,
                        "element_spacing_over_lambda" => &mut cfg.element_spacing_over_lambda,
                        _ => unreachable!("key list and match arms agree"),
                    };
                    *slot = Some(x);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Resolves defaults and validates the configuration.
    pub fn build(&self) -> Result<Scenario> {
        let radio = RadioParams {
            carrier_frequency_hz: positive("carrier_hz", self.carrier_hz, 3.0e9)?,
            bandwidth_hz: positive("bandwidth_hz", self.bandwidth_hz, 10.0e6)?,
            transmit_power_dbm: self.tx_power_dbm.unwrap_or(43.0),
            noise_power_dbm: self.noise_dbm.unwrap_or(-94.0),
        };
        let lambda = radio.wavelength();

        let ref_db = self.ref_gain_db.unwrap_or(-30.0);
        let r_12 = positive("r_12_m", self.r_12_m, 100.0)?;
        let budget = |dkey: &str, d: Option<f64>, ddef: f64, akey: &str, a: Option<f64>, adef: f64, g: Option<f64>| -> Result<LinkBudget> {
            Ok(LinkBudget {
                distance_m: positive(dkey, d, ddef)?,
                exponent: exponent(akey, a, adef)?,
                ref_gain_db: g.unwrap_or(ref_db),
            })
        };
        let pathloss = LinkPathLoss::from_budgets(
            budget("r_t1_m", self.r_t1_m, 1.0, "alpha_t1", self.alpha_t1, 2.2, self.ref_gain_t1_db)?,
            budget("r_12_m", Some(r_12), r_12, "alpha_12", self.alpha_12, 3.0, self.ref_gain_12_db)?,
            budget("r_2r_m", self.r_2r_m, 15.0, "alpha_2r", self.alpha_2r, 2.2, self.ref_gain_2r_db)?,
            budget("r_1r_m", self.r_1r_m, r_12, "alpha_1r", self.alpha_1r, 2.2, self.ref_gain_1r_db)?,
            budget("r_t2_m", self.r_t2_m, r_12, "alpha_t2", self.alpha_t2, 3.0, self.ref_gain_t2_db)?,
        )?;

        let spacing = positive(
            "element_spacing_over_lambda",
            self.element_spacing_over_lambda,
            0.125,
        )?;
        let d = spacing * lambda;
        let geometry = |nkey: &str, n: usize, hkey: &str, n_h: Option<usize>| -> Result<IrsGeometry> {
            match n_h {
                None => IrsGeometry::near_square(n, d, lambda),
                Some(h) if n.is_multiple_of(h) => IrsGeometry::new(h, n / h, d, d, lambda),
                Some(h) => Err(Error::config(
                    hkey,
                    format!("{h} elements per row does not divide {nkey} = {n}"),
                )),
            }
        };
        let n1 = self.n1.unwrap_or(32);
        let n2 = self.n2.unwrap_or(32);

        Ok(Scenario {
            radio,
            pathloss,
            irs1_geometry: geometry("n1", n1, "n_h1", self.n_h1)?,
            irs2_geometry: geometry("n2", n2, "n_h2", self.n_h2)?,
            threshold_mode: self.threshold_mode.unwrap_or_default(),
            element_spacing_over_lambda: spacing,
        })
    }

    /// Fully resolved configuration of `scenario`, suitable for echoing.
    pub fn resolved(scenario: &Scenario) -> ScenarioConfig {
        let p = &scenario.pathloss;
        ScenarioConfig {
            carrier_hz: Some(scenario.radio.carrier_frequency_hz),
            bandwidth_hz: Some(scenario.radio.bandwidth_hz),
            tx_power_dbm: Some(scenario.radio.transmit_power_dbm),
            noise_dbm: Some(scenario.radio.noise_power_dbm),
            r_t1_m: Some(p.t1.distance_m),
            r_12_m: Some(p.l12.distance_m),
            r_2r_m: Some(p.l2r.distance_m),
            r_1r_m: Some(p.l1r.distance_m),
            r_t2_m: Some(p.t2.distance_m),
            alpha_t1: Some(p.t1.exponent),
            alpha_12: Some(p.l12.exponent),
            alpha_2r: Some(p.l2r.exponent),
            alpha_1r: Some(p.l1r.exponent),
            alpha_t2: Some(p.t2.exponent),
            ref_gain_db: None,
            ref_gain_t1_db: Some(p.t1.ref_gain_db),
            ref_gain_12_db: Some(p.l12.ref_gain_db),
            ref_gain_2r_db: Some(p.l2r.ref_gain_db),
            ref_gain_1r_db: Some(p.l1r.ref_gain_db),
            ref_gain_t2_db: Some(p.t2.ref_gain_db),
            n1: Some(scenario.n1()),
            n2: Some(scenario.n2()),
            n_h1: Some(scenario.irs1_geometry.n_h),
            n_h2: Some(scenario.irs2_geometry.n_h),
            element_spacing_over_lambda: Some(scenario.element_spacing_over_lambda),
            threshold_mode: Some(scenario.threshold_mode),
        }
    }
}

/// Parses a scenario from flat key-value text; omitted keys take reference values.
pub fn build_scenario(config_source: &str) -> Result<Scenario> {
    ScenarioConfig::from_toml_str(config_source)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pathloss_examples() {
        assert!(rel(pathloss_from_distance(1.0, 2.2, -30.0).unwrap(), 1e-3) < 1e-14);
        assert!(rel(pathloss_from_distance(100.0, 3.0, -30.0).unwrap(), 1e-9) < 1e-12);
        let v = pathloss_from_distance(15.0, 2.2, -30.0).unwrap();
        assert!(rel(v, 1e-3 * (-2.2 * 15f64.ln()).exp()) < 1e-12, "{v}");
        assert!(rel(v, 2.5858e-6) < 1e-4, "{v}");
    }

    #[test]
    fn pathloss_rejects_non_positive_distance() {
        assert!(matches!(pathloss_from_distance(0.0, 2.0, -30.0), Err(Error::Domain(_))));
        assert!(pathloss_from_distance(-1.0, 2.0, -30.0).is_err());
    }

    #[test]
    fn reference_defaults() {
        let s = build_scenario("").unwrap();
        assert!(rel(s.gamma0(), 10f64.powf(13.7)) < 1e-12);
        assert!((s.gamma0() - 5.01e13).abs() / 5.01e13 < 1e-3);
        assert!((s.wavelength() - 0.09993).abs() < 1e-5);
        assert_eq!(s.threshold_mode, ThresholdMode::TargetRate);
        assert_eq!(s.pathloss.t1.distance_m, 1.0);
        assert_eq!(s.pathloss.l1r.distance_m, 100.0);
        assert_eq!(s.pathloss.t2.exponent, 3.0);
    }

    #[test]
    fn equal_powers_give_unit_gamma0() {
        let s = build_scenario("tx_power_dbm = -10\nnoise_dbm = -10\n").unwrap();
        assert!((s.gamma0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_errors_name_the_key() {
        let err = build_scenario("carrier_hz = -1.0").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "carrier_hz"));
        let err = build_scenario("bogus = 3").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "bogus"));
        let err = build_scenario("n1 = 10\nn_h1 = 3").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n_h1"));
        let err = build_scenario("threshold_mode = \"dbm\"").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "threshold_mode"));
        let err = build_scenario("alpha_12 = 1.5").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "alpha_12"));
    }

    #[test]
    fn resolved_config_rebuilds_same_scenario() {
        let s = build_scenario("n1 = 12\nn2 = 20\nthreshold_mode = \"snr\"\nref_gain_db = -20").unwrap();
        let text = toml::to_string(&ScenarioConfig::resolved(&s)).unwrap();
        let back = build_scenario(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_to_snr(0.0, ThresholdMode::TargetRate).unwrap(), 0.0);
        assert_eq!(threshold_to_snr(5.0, ThresholdMode::TargetRate).unwrap(), 31.0);
        assert_eq!(threshold_to_snr(31.0, ThresholdMode::SnrDirect).unwrap(), 31.0);
        assert!(threshold_to_snr(-0.1, ThresholdMode::SnrDirect).is_err());
        assert!((snr_to_threshold(31.0, ThresholdMode::TargetRate) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn split_preserves_total() {
        let s = Scenario::default();
        let t = s.with_split(40, 24).unwrap();
        assert_eq!(t.total_elements(), 64);
        assert_eq!(t.n1(), 40);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gamma0_offset_invariant(p in -50.0f64..60.0, n in -120.0f64..-50.0, off in -30.0f64..30.0) {
                let a = RadioParams { transmit_power_dbm: p, noise_power_dbm: n, ..Default::default() };
                let b = RadioParams { transmit_power_dbm: p + off, noise_power_dbm: n + off, ..Default::default() };
                prop_assert!((a.gamma0() - b.gamma0()).abs() <= 1e-9 * a.gamma0());
            }

            #[test]
            fn pathloss_decreasing(d in 1.01f64..500.0, dd in 0.01f64..50.0, a in 2.0f64..4.0, da in 0.01f64..1.0) {
                let base = pathloss_from_distance(d, a, -30.0).unwrap();
                prop_assert!(pathloss_from_distance(d + dd, a, -30.0).unwrap() < base);
                prop_assert!(pathloss_from_distance(d, a + da, -30.0).unwrap() < base);
            }

            #[test]
            fn threshold_monotone(t in 0.0f64..20.0, dt in 1e-6f64..5.0) {
                for mode in [ThresholdMode::TargetRate, ThresholdMode::SnrDirect] {
                    prop_assert!(threshold_to_snr(t + dt, mode).unwrap() > threshold_to_snr(t, mode).unwrap());
                }
            }
        }
    }
}
