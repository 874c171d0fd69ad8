//! Monte-Carlo sampling of correlated Rayleigh channels and empirical
//! oracles for the analytic results.
//!
//! Trials are grouped into fixed-size blocks. Block `b` draws from a ChaCha8
//! generator seeded with the run seed on stream `b`, and block results are
//! merged in block order, so a run is bit-for-bit reproducible whatever the
//! number of worker threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{hermitian_sqrt, CorrelationMatrix, LinkCovarianceSet};
use crate::de::{check_unit_modulus, PhaseConfig};
use crate::error::{Error, Result};

/// Trials per independent random stream.
pub const BLOCK_TRIALS: u64 = 4096;

/// One draw of all five channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Tx to IRS 1.
    pub g1: DVector<Complex64>,
    /// IRS 2 to Rx.
    pub g2: DVector<Complex64>,
    /// IRS 1 to Rx.
    pub u1: DVector<Complex64>,
    /// Tx to IRS 2.
    pub u2: DVector<Complex64>,
    /// IRS 2 to IRS 1, `N1 x N2` (rows index IRS 1).
    pub d_matrix: DMatrix<Complex64>,
}

/// Standard complex normal, `E|w|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| complex_normal(rng))
}

/// White draws behind one realization, in generation order.
struct WhiteDraw {
    g1: DVector<Complex64>,
    u1: DVector<Complex64>,
    g2: DVector<Complex64>,
    u2: DVector<Complex64>,
    w: DMatrix<Complex64>,
}

impl WhiteDraw {
    fn sample<R: Rng + ?Sized>(n1: usize, n2: usize, rng: &mut R) -> Self {
        WhiteDraw {
            g1: normal_vector(n1, rng),
            u1: normal_vector(n1, rng),
            g2: normal_vector(n2, rng),
            u2: normal_vector(n2, rng),
            w: DMatrix::from_fn(n1, n2, |_, _| complex_normal(rng)),
        }
    }
}

/// The three amplitudes whose sum is the end-to-end channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerms {
    /// `g1^H Phi1 D Phi2 g2`
    pub double: Complex64,
    /// `g1^H Phi1 u1`
    pub single_1: Complex64,
    /// `u2^H Phi2 g2`
    pub single_2: Complex64,
}

impl LinkTerms {
    pub fn total(&self) -> Complex64 {
        self.double + self.single_1 + self.single_2
    }
}

/// Colouring factors for the five links.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    n1: usize,
    n2: usize,
    /// `R1^(1/2)`, `R2^(1/2)`.
    s1: DMatrix<Complex64>,
    s2: DMatrix<Complex64>,
    gains: [f64; 5],
}

impl ChannelSampler {
    pub fn new(cov: &LinkCovarianceSet) -> Result<Self> {
        let g = cov.gains();
        Ok(ChannelSampler {
            n1: cov.n1(),
            n2: cov.n2(),
            s1: hermitian_sqrt(cov.r1())?,
            s2: hermitian_sqrt(cov.r2())?,
            gains: [g.t1.sqrt(), g.l12.sqrt(), g.l2r.sqrt(), g.l1r.sqrt(), g.t2.sqrt()],
        })
    }

    fn colour(&self, w: &WhiteDraw) -> ChannelRealization {
        let [t1, l12, l2r, l1r, t2] = self.gains;
        ChannelRealization {
            g1: &self.s1 * &w.g1 * Complex64::new(t1, 0.0),
            u1: &self.s1 * &w.u1 * Complex64::new(l1r, 0.0),
            g2: &self.s2 * &w.g2 * Complex64::new(l2r, 0.0),
            u2: &self.s2 * &w.u2 * Complex64::new(t2, 0.0),
            d_matrix: &self.s1 * &w.w * &self.s2 * Complex64::new(l12, 0.0),
        }
    }

    /// One full realization (materializes `D`).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        self.colour(&WhiteDraw::sample(self.n1, self.n2, rng))
    }

    /// The three link amplitudes of one draw without forming `D`; uses the
    /// same random numbers as [`ChannelSampler::sample`].
    pub fn sample_terms<R: Rng + ?Sized>(&self, phases: &PhaseConfig, rng: &mut R) -> LinkTerms {
        let w = WhiteDraw::sample(self.n1, self.n2, rng);
        let [t1, l12, l2r, l1r, t2] = self.gains;
        let s1 = phases.phases_1();
        let s2 = phases.phases_2();
        let g1 = &self.s1 * &w.g1 * Complex64::new(t1, 0.0);
        let u1 = &self.s1 * &w.u1 * Complex64::new(l1r, 0.0);
        let g2 = &self.s2 * &w.g2 * Complex64::new(l2r, 0.0);
        let u2 = &self.s2 * &w.u2 * Complex64::new(t2, 0.0);
        let single_1 = (0..self.n1).map(|m| g1[m].conj() * s1[m] * u1[m]).sum();
        let single_2 = (0..self.n2).map(|m| u2[m].conj() * s2[m] * g2[m]).sum();
        // g1^H Phi1 S1 W S2 Phi2 g2 = a^H W b with a = S1 Phi1^H g1, b = S2 Phi2 g2
        let a = &self.s1 * g1.zip_map(s1, |g, s| s.conj() * g);
        let b = &self.s2 * g2.zip_map(s2, |g, s| s * g);
        let wb = &w.w * b;
        let double = a.dotc(&wb) * l12;
        LinkTerms { double, single_1, single_2 }
    }
}

/// Draws one realization of all channels.
pub fn sample_channels<R: Rng + ?Sized>(cov: &LinkCovarianceSet, rng: &mut R) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(cov)?.sample(rng))
}

/// The three link amplitudes of a realization, evaluated term by term.
pub fn link_terms(real: &ChannelRealization, phases: &PhaseConfig) -> Result<LinkTerms> {
    let (n1, n2) = (real.g1.len(), real.g2.len());
    let s1 = phases.phases_1();
    let s2 = phases.phases_2();
    for (expected, found) in [
        (n1, real.u1.len()),
        (n1, real.d_matrix.nrows()),
        (n1, s1.len()),
        (n2, real.u2.len()),
        (n2, real.d_matrix.ncols()),
        (n2, s2.len()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch { expected, found });
        }
    }
    let left = real.g1.zip_map(s1, |g, s| g.conj() * s);
    let right = real.g2.zip_map(s2, |g, s| s * g);
    let double = (left.transpose() * &real.d_matrix * &right)[(0, 0)];
    let single_1 = left.dot(&real.u1);
    let single_2 = (0..n2).map(|m| real.u2[m].conj() * s2[m] * real.g2[m]).sum();
    Ok(LinkTerms { double, single_1, single_2 })
}

/// `gamma0 |g1^H Phi1 D Phi2 g2 + g1^H Phi1 u1 + u2^H Phi2 g2|^2`.
pub fn instantaneous_snr(real: &ChannelRealization, phases: &PhaseConfig, gamma0: f64) -> Result<f64> {
    Ok(gamma0 * link_terms(real, phases)?.total().norm_sqr())
}

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `|value - reference| / stderr`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 { ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { value: mean, stderr: (var / n).sqrt() }
    }
}

fn binomial(count: u64, trials: u64) -> Estimate {
    let p = count as f64 / trials as f64;
    Estimate { value: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() }
}

/// Runs `trials` trials in blocks and returns per-block results in block order.
fn run_blocks<T, F>(trials: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n = BLOCK_TRIALS.min(trials - b * BLOCK_TRIALS);
            f(&mut rng, n)
        })
        .collect()
}

/// Result of a Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub trials: u64,
    pub seed: u64,
    pub mean_snr: Estimate,
    /// Present when a threshold was given.
    pub empirical_coverage: Option<Estimate>,
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    Ok(())
}

fn check_phases(cov: &LinkCovarianceSet, phases: &PhaseConfig) -> Result<()> {
    check_unit_modulus(phases.phases_1())?;
    check_unit_modulus(phases.phases_2())?;
    if phases.phases_1().len() != cov.n1() {
        return Err(Error::DimensionMismatch { expected: cov.n1(), found: phases.phases_1().len() });
    }
    if phases.phases_2().len() != cov.n2() {
        return Err(Error::DimensionMismatch { expected: cov.n2(), found: phases.phases_2().len() });
    }
    Ok(())
}

fn double_link_run(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    tau: Option<f64>,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    check_trials(trials)?;
    check_phases(cov, phases)?;
    let sampler = ChannelSampler::new(cov)?;
    let blocks = run_blocks(trials, seed, |rng, n| {
        let mut m = Moments::default();
        let mut hits = 0u64;
        for _ in 0..n {
            let snr = gamma0 * sampler.sample_terms(phases, rng).total().norm_sqr();
            m.push(snr);
            if tau.is_some_and(|t| snr > t) {
                hits += 1;
            }
        }
        (m, hits)
    });
    let mut total = Moments::default();
    let mut hits = 0;
    for (m, h) in &blocks {
        total.merge(m);
        hits += h;
    }
    Ok(McResult {
        trials,
        seed,
        mean_snr: total.estimate(),
        empirical_coverage: tau.map(|_| binomial(hits, trials)),
    })
}

/// Sample mean of the instantaneous SNR.
pub fn mean_snr(cov: &LinkCovarianceSet, phases: &PhaseConfig, gamma0: f64, trials: u64, seed: u64) -> Result<McResult> {
    double_link_run(cov, phases, gamma0, None, trials, seed)
}

/// Fraction of trials with SNR above `tau`.
pub fn empirical_coverage(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("threshold must be non-negative, got {tau}")));
    }
    double_link_run(cov, phases, gamma0, Some(tau), trials, seed)
}

fn count_above(snr: f64, taus: &[f64], counts: &mut [u64]) {
    for (c, &t) in counts.iter_mut().zip(taus) {
        if snr > t {
            *c += 1;
        }
    }
}

/// Empirical coverage at every threshold from one shared set of realizations.
pub fn coverage_sweep(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    taus: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    check_trials(trials)?;
    check_phases(cov, phases)?;
    let sampler = ChannelSampler::new(cov)?;
    let blocks = run_blocks(trials, seed, |rng, n| {
        let mut counts = vec![0u64; taus.len()];
        for _ in 0..n {
            let snr = gamma0 * sampler.sample_terms(phases, rng).total().norm_sqr();
            count_above(snr, taus, &mut counts);
        }
        counts
    });
    let mut counts = vec![0u64; taus.len()];
    for b in &blocks {
        for (c, x) in counts.iter_mut().zip(b) {
            *c += x;
        }
    }
    Ok(counts.into_iter().map(|c| binomial(c, trials)).collect())
}

/// Instantaneous SNR of every trial, in trial order.
pub fn snr_samples(cov: &LinkCovarianceSet, phases: &PhaseConfig, gamma0: f64, trials: u64, seed: u64) -> Result<Vec<f64>> {
    check_trials(trials)?;
    check_phases(cov, phases)?;
    let sampler = ChannelSampler::new(cov)?;
    let blocks = run_blocks(trials, seed, |rng, n| {
        (0..n).map(|_| gamma0 * sampler.sample_terms(phases, rng).total().norm_sqr()).collect::<Vec<f64>>()
    });
    Ok(blocks.concat())
}

/// Sample means of the individual terms of `|a + b + c|^2`, each scaled by `gamma0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermStatistics {
    pub trials: u64,
    pub total: Estimate,
    /// `|g1^H Phi1 D Phi2 g2|^2`
    pub double: Estimate,
    /// `|g1^H Phi1 u1|^2`
    pub single_1: Estimate,
    /// `|u2^H Phi2 g2|^2`
    pub single_2: Estimate,
    /// `2 Re((g1^H Phi1 u1)^* g1^H Phi1 D Phi2 g2)`
    pub cross_single_1_double: Estimate,
    /// `2 Re((g1^H Phi1 u1)^* u2^H Phi2 g2)`
    pub cross_single_1_single_2: Estimate,
    /// `2 Re((u2^H Phi2 g2)^* g1^H Phi1 D Phi2 g2)`
    pub cross_single_2_double: Estimate,
}

/// Per-term sample means of the instantaneous SNR expansion.
pub fn term_statistics(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    trials: u64,
    seed: u64,
) -> Result<TermStatistics> {
    check_trials(trials)?;
    check_phases(cov, phases)?;
    let sampler = ChannelSampler::new(cov)?;
    let blocks = run_blocks(trials, seed, |rng, n| {
        let mut m = [Moments::default(); 7];
        for _ in 0..n {
            let t = sampler.sample_terms(phases, rng);
            let vals = [
                t.total().norm_sqr(),
                t.double.norm_sqr(),
                t.single_1.norm_sqr(),
                t.single_2.norm_sqr(),
                2.0 * (t.single_1.conj() * t.double).re,
                2.0 * (t.single_1.conj() * t.single_2).re,
                2.0 * (t.single_2.conj() * t.double).re,
            ];
            for (acc, v) in m.iter_mut().zip(vals) {
                acc.push(gamma0 * v);
            }
        }
        m
    });
    let mut total = [Moments::default(); 7];
    for b in &blocks {
        for (acc, m) in total.iter_mut().zip(b) {
            acc.merge(m);
        }
    }
    let e = total.map(|m| m.estimate());
    Ok(TermStatistics {
        trials,
        total: e[0],
        double: e[1],
        single_1: e[2],
        single_2: e[3],
        cross_single_1_double: e[4],
        cross_single_1_single_2: e[5],
        cross_single_2_double: e[6],
    })
}

/// Samples the single-surface link `g1~^H Phi g2~`.
#[derive(Debug, Clone)]
pub struct SingleSampler {
    a_t: DMatrix<Complex64>,
    a_r: DMatrix<Complex64>,
}

impl SingleSampler {
    pub fn new(r_t: &CorrelationMatrix, r_r: &CorrelationMatrix) -> Result<Self> {
        if r_t.dim() != r_r.dim() {
            return Err(Error::DimensionMismatch { expected: r_t.dim(), found: r_r.dim() });
        }
        Ok(SingleSampler { a_t: hermitian_sqrt(r_t)?, a_r: hermitian_sqrt(r_r)? })
    }

    pub fn sample_amplitude<R: Rng + ?Sized>(&self, phases: &DVector<Complex64>, rng: &mut R) -> Complex64 {
        let n = self.a_t.nrows();
        let g1 = &self.a_t * normal_vector(n, rng);
        let g2 = &self.a_r * normal_vector(n, rng);
        (0..n).map(|m| g1[m].conj() * phases[m] * g2[m]).sum()
    }
}

fn single_run(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    phases: &DVector<Complex64>,
    gamma0: f64,
    taus: &[f64],
    trials: u64,
    seed: u64,
) -> Result<(Estimate, Vec<Estimate>)> {
    check_trials(trials)?;
    check_unit_modulus(phases)?;
    if phases.len() != r_t.dim() {
        return Err(Error::DimensionMismatch { expected: r_t.dim(), found: phases.len() });
    }
    let sampler = SingleSampler::new(r_t, r_r)?;
    let blocks = run_blocks(trials, seed, |rng, n| {
        let mut m = Moments::default();
        let mut counts = vec![0u64; taus.len()];
        for _ in 0..n {
            let snr = gamma0 * sampler.sample_amplitude(phases, rng).norm_sqr();
            m.push(snr);
            count_above(snr, taus, &mut counts);
        }
        (m, counts)
    });
    let mut total = Moments::default();
    let mut counts = vec![0u64; taus.len()];
    for (m, c) in &blocks {
        total.merge(m);
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    Ok((total.estimate(), counts.into_iter().map(|c| binomial(c, trials)).collect()))
}

/// Sample mean of `gamma0 |g1~^H Phi g2~|^2`.
pub fn mean_snr_single(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    phases: &DVector<Complex64>,
    gamma0: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    let (mean, _) = single_run(r_t, r_r, phases, gamma0, &[], trials, seed)?;
    Ok(McResult { trials, seed, mean_snr: mean, empirical_coverage: None })
}

/// Empirical coverage of the single-surface link.
pub fn empirical_coverage_single(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    phases: &DVector<Complex64>,
    gamma0: f64,
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<McResult> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("threshold must be non-negative, got {tau}")));
    }
    let (mean, cov) = single_run(r_t, r_r, phases, gamma0, &[tau], trials, seed)?;
    Ok(McResult { trials, seed, mean_snr: mean, empirical_coverage: Some(cov[0]) })
}

/// Single-surface analogue of [`coverage_sweep`].
pub fn coverage_sweep_single(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    phases: &DVector<Complex64>,
    gamma0: f64,
    taus: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    Ok(single_run(r_t, r_r, phases, gamma0, taus, trials, seed)?.1)
}
