//! Phase-shift optimization by projected gradient ascent on the coverage
//! probability.
//!
//! Each surface is updated in turn with the other held fixed. One update is
//! `s <- exp(j arg(s + mu q))` where `q = dP_c/ds^*` and `mu` comes from a
//! backtracking line search with a sufficient-increase test against the
//! tangent component of `q`.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationMatrix, LinkCovarianceSet};
use crate::coverage::AlzerParams;
use crate::de::{
    check_unit_modulus, diag_product_raw, random_phases, trace_quadratic_raw, DoubleTraces, IrsIndex,
    PhaseConfig,
};
use crate::error::{Error, Result};

/// Tangent-gradient norm below which a point is treated as stationary.
pub const STATIONARY_TOL: f64 = 1e-12;

/// Starting point used when no explicit initial phases are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    Ones,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_outer_iterations: usize,
    /// Accepted steps per surface per outer iteration.
    pub max_inner_steps: usize,
    /// Stop once the relative change of `P_c` over an outer iteration falls below this.
    pub convergence_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_increase: f64,
    /// Halvings tried before a step is declared null.
    pub max_backtracks: usize,
    pub init: InitPolicy,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_outer_iterations: 100,
            max_inner_steps: 1,
            convergence_tol: 1e-5,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_increase: 1e-4,
            max_backtracks: 60,
            init: InitPolicy::Ones,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0) {
            return Err(Error::Domain(format!("initial step must be positive, got {}", self.initial_step)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Domain(format!("shrink factor must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.sufficient_increase > 0.0 && self.sufficient_increase < 1.0) {
            return Err(Error::Domain(format!(
                "sufficient-increase constant must lie in (0, 1), got {}",
                self.sufficient_increase
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Domain(format!("convergence tolerance must be positive, got {}", self.convergence_tol)));
        }
        if self.max_inner_steps == 0 {
            return Err(Error::Domain("at least one inner step is required".into()));
        }
        Ok(())
    }

    /// Initial phases for a double-surface problem.
    pub fn initial_phases(&self, n1: usize, n2: usize) -> PhaseConfig {
        match self.init {
            InitPolicy::Ones => PhaseConfig::ones(n1, n2),
            InitPolicy::Random => PhaseConfig::random(n1, n2, &mut ChaCha8Rng::seed_from_u64(self.seed)),
        }
    }

    /// Initial phases for a single surface.
    pub fn initial_single(&self, n: usize) -> DVector<Complex64> {
        match self.init {
            InitPolicy::Ones => DVector::from_element(n, Complex64::new(1.0, 0.0)),
            InitPolicy::Random => random_phases(n, &mut ChaCha8Rng::seed_from_u64(self.seed)),
        }
    }
}

/// Coverage maximization problem for the double-surface link.
#[derive(Debug, Clone)]
pub struct CoverageProblem<'a> {
    pub cov: &'a LinkCovarianceSet,
    pub gamma0: f64,
    /// Linear SNR threshold.
    pub tau: f64,
    pub alzer: AlzerParams,
}

impl<'a> CoverageProblem<'a> {
    pub fn new(cov: &'a LinkCovarianceSet, gamma0: f64, tau: f64, m_terms: u32) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("threshold must be non-negative, got {tau}")));
        }
        Ok(CoverageProblem { cov, gamma0, tau, alzer: AlzerParams::new(m_terms)? })
    }

    /// `(P_c, gamma_eff)` at `phases`.
    pub fn evaluate(&self, phases: &PhaseConfig) -> Result<(f64, f64)> {
        let t = DoubleTraces::compute(self.cov, phases)?;
        let g = t.de_snr(self.cov.beta_12(), self.gamma0, self.cov.n1(), self.cov.n2()).value;
        Ok((coverage_of(&self.alzer, self.tau, g), g))
    }

    /// `dP_c / ds_which^*`.
    pub fn gradient(&self, which: IrsIndex, phases: &PhaseConfig) -> Result<DVector<Complex64>> {
        let cov = self.cov;
        let t = DoubleTraces::compute(cov, phases)?;
        let g = t.de_snr(cov.beta_12(), self.gamma0, cov.n1(), cov.n2()).value;
        let slope = slope_of(&self.alzer, self.tau, g);
        let b12 = cov.beta_12();
        let dgamma = match which {
            IrsIndex::One => {
                let s1 = phases.phases_1();
                let cascade = diag_product_raw(cov.r_t1().matrix(), s1, cov.r1().matrix());
                let single = diag_product_raw(cov.r_t1().matrix(), s1, cov.r_1r().matrix());
                cascade * Complex64::new(b12 * t.cascade_2, 0.0) + single
            }
            IrsIndex::Two => {
                let s2 = phases.phases_2();
                let cascade = diag_product_raw(cov.r2().matrix(), s2, cov.r_2r().matrix());
                let single = diag_product_raw(cov.r_t2().matrix(), s2, cov.r_2r().matrix());
                cascade * Complex64::new(b12 * t.cascade_1, 0.0) + single
            }
        };
        Ok(dgamma * Complex64::new(slope * self.gamma0, 0.0))
    }
}

fn coverage_of(alzer: &AlzerParams, tau: f64, g: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else if !(g > 0.0) {
        0.0
    } else {
        alzer.coverage_at(tau / g)
    }
}

fn slope_of(alzer: &AlzerParams, tau: f64, g: f64) -> f64 {
    if g > 0.0 {
        alzer.slope(tau, g)
    } else {
        0.0
    }
}

/// `dP_c / ds_1^*` for the double-surface link.
pub fn gradient_phases_1(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    tau: f64,
    m_terms: u32,
) -> Result<DVector<Complex64>> {
    CoverageProblem::new(cov, gamma0, tau, m_terms)?.gradient(IrsIndex::One, phases)
}

/// `dP_c / ds_2^*` for the double-surface link.
pub fn gradient_phases_2(
    cov: &LinkCovarianceSet,
    phases: &PhaseConfig,
    gamma0: f64,
    tau: f64,
    m_terms: u32,
) -> Result<DVector<Complex64>> {
    CoverageProblem::new(cov, gamma0, tau, m_terms)?.gradient(IrsIndex::Two, phases)
}

/// Single-surface coverage problem with covariances `R_t`, `R_r`.
#[derive(Debug, Clone)]
pub struct SingleProblem<'a> {
    pub r_t: &'a CorrelationMatrix,
    pub r_r: &'a CorrelationMatrix,
    pub gamma0: f64,
    pub tau: f64,
    pub alzer: AlzerParams,
}

impl<'a> SingleProblem<'a> {
    pub fn new(r_t: &'a CorrelationMatrix, r_r: &'a CorrelationMatrix, gamma0: f64, tau: f64, m_terms: u32) -> Result<Self> {
        if r_t.dim() != r_r.dim() {
            return Err(Error::DimensionMismatch { expected: r_t.dim(), found: r_r.dim() });
        }
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("threshold must be non-negative, got {tau}")));
        }
        Ok(SingleProblem { r_t, r_r, gamma0, tau, alzer: AlzerParams::new(m_terms)? })
    }

    fn check(&self, s: &DVector<Complex64>) -> Result<()> {
        if s.len() != self.r_t.dim() {
            return Err(Error::DimensionMismatch { expected: self.r_t.dim(), found: s.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, s: &DVector<Complex64>) -> Result<(f64, f64)> {
        self.check(s)?;
        let g = self.gamma0 * trace_quadratic_raw(self.r_t.matrix(), s, self.r_r.matrix()).re;
        Ok((coverage_of(&self.alzer, self.tau, g), g))
    }

    /// `dP_c / ds^*`.
    pub fn gradient(&self, s: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let (_, g) = self.evaluate(s)?;
        let slope = slope_of(&self.alzer, self.tau, g);
        Ok(diag_product_raw(self.r_t.matrix(), s, self.r_r.matrix()) * Complex64::new(slope * self.gamma0, 0.0))
    }
}

/// Nearest unit-modulus vector, `exp(j arg(z))` entrywise; zero maps to 1.
pub fn project_unit_modulus(s: &DVector<Complex64>) -> DVector<Complex64> {
    s.map(|z| {
        let r = z.norm();
        if r == 0.0 || !r.is_finite() {
            Complex64::new(1.0, 0.0)
        } else {
            z / r
        }
    })
}

/// Component of `q` tangent to the unit-modulus manifold at `s`.
pub fn tangent_component(q: &DVector<Complex64>, s: &DVector<Complex64>) -> DVector<Complex64> {
    q.zip_map(s, |qm, sm| qm - sm * (qm * sm.conj()).re)
}

/// Derivative of a real function along `dir` given its Wirtinger gradient `q = df/ds^*`.
pub fn directional_derivative(q: &DVector<Complex64>, dir: &DVector<Complex64>) -> f64 {
    2.0 * q.iter().zip(dir.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
}

/// One row of an optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Outer iteration index; 0 is the initial point.
    pub outer_iter: usize,
    /// Surface updated (1 or 2), or 0 for the initial point.
    pub irs_updated: u8,
    pub p_coverage: f64,
    pub gamma_bar_eff: f64,
    /// Accepted step, `None` for a null step.
    pub step_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
    pub converged: bool,
    /// Outer iterations performed.
    pub outer_iterations: usize,
}

impl OptimizerTrace {
    pub fn final_coverage(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.p_coverage)
    }

    pub fn final_gamma(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gamma_bar_eff)
    }

    /// True when `P_c` never decreases along the trace.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].p_coverage >= w[0].p_coverage)
    }

    /// Coverage reached at the end of each outer iteration (index 0 is the start).
    pub fn per_outer_iteration(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in &self.records {
            if r.outer_iter == out.len() {
                out.push(r.p_coverage);
            } else if let Some(last) = out.last_mut() {
                *last = r.p_coverage;
            }
        }
        out
    }

    /// CSV with columns `outer_iter,irs_updated,p_coverage,gamma_bar_eff,step_size`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "outer_iter,irs_updated,p_coverage,gamma_bar_eff,step_size")?;
        for r in &self.records {
            let step = r.step_size.map_or(String::new(), |s| format!("{s:e}"));
            writeln!(out, "{},{},{:e},{:e},{}", r.outer_iter, r.irs_updated, r.p_coverage, r.gamma_bar_eff, step)?;
        }
        Ok(())
    }
}

/// Outcome of one projected-gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub phases: DVector<Complex64>,
    pub p_coverage: f64,
    pub gamma_bar_eff: f64,
    pub step_size: Option<f64>,
}

/// Backtracking projected-gradient step on one block.
fn line_search<F>(
    s: &DVector<Complex64>,
    q: &DVector<Complex64>,
    p_old: f64,
    g_old: f64,
    opt: &OptimizerConfig,
    mut eval: F,
) -> Result<StepOutcome>
where
    F: FnMut(&DVector<Complex64>) -> Result<(f64, f64)>,
{
    let null = StepOutcome { phases: s.clone(), p_coverage: p_old, gamma_bar_eff: g_old, step_size: None };
    let tangent = tangent_component(q, s);
    let tnorm2 = tangent.norm_squared();
    let qnorm = q.norm();
    if !tnorm2.is_finite() || tnorm2.sqrt() <= STATIONARY_TOL * qnorm.max(1.0) {
        return Ok(null);
    }
    // the gradient's scale depends on gamma0 and the path losses, so the first
    // trial step moves the largest entry by `initial_step`
    let mut mu = opt.initial_step / q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for _ in 0..=opt.max_backtracks {
        let trial = project_unit_modulus(&(s + q * Complex64::new(mu, 0.0)));
        let (p, g) = eval(&trial)?;
        if p >= p_old + opt.sufficient_increase * mu * tnorm2 && p > p_old {
            return Ok(StepOutcome { phases: trial, p_coverage: p, gamma_bar_eff: g, step_size: Some(mu) });
        }
        mu *= opt.shrink;
    }
    Ok(null)
}

/// Gradient step with backtracking on surface `which`, the other held fixed.
pub fn ascend_one_irs(
    which: IrsIndex,
    state: &PhaseConfig,
    problem: &CoverageProblem<'_>,
    opt: &OptimizerConfig,
) -> Result<(PhaseConfig, TraceRecord)> {
    let (p_old, g_old) = problem.evaluate(state)?;
    let q = problem.gradient(which, state)?;
    let s = state.block(which);
    let step = line_search(s, &q, p_old, g_old, opt, |trial| {
        problem.evaluate(&state.with_block(which, trial.clone())?)
    })?;
    let record = TraceRecord {
        outer_iter: 0,
        irs_updated: which.number(),
        p_coverage: step.p_coverage,
        gamma_bar_eff: step.gamma_bar_eff,
        step_size: step.step_size,
    };
    let next = if step.step_size.is_some() { state.with_block(which, step.phases)? } else { state.clone() };
    Ok((next, record))
}

fn relative_change(new: f64, old: f64) -> f64 {
    let d = (new - old).abs();
    if d == 0.0 {
        0.0
    } else {
        d / old.abs().max(f64::MIN_POSITIVE)
    }
}

/// Alternates projected-gradient ascent between the two surfaces.
pub fn alternate_optimize(
    initial: &PhaseConfig,
    problem: &CoverageProblem<'_>,
    opt: &OptimizerConfig,
) -> Result<(PhaseConfig, OptimizerTrace)> {
    opt.validate()?;
    check_unit_modulus(initial.phases_1())?;
    check_unit_modulus(initial.phases_2())?;
    let (p0, g0) = problem.evaluate(initial)?;
    let mut trace = OptimizerTrace::default();
    trace.records.push(TraceRecord { outer_iter: 0, irs_updated: 0, p_coverage: p0, gamma_bar_eff: g0, step_size: None });
    let mut state = initial.clone();
    let mut p_prev = p0;
    for outer in 1..=opt.max_outer_iterations {
        trace.outer_iterations = outer;
        let mut any_step = false;
        for which in [IrsIndex::One, IrsIndex::Two] {
            for _ in 0..opt.max_inner_steps {
                let (next, mut rec) = ascend_one_irs(which, &state, problem, opt)?;
                rec.outer_iter = outer;
                trace.records.push(rec);
                state = next;
                if rec.step_size.is_none() {
                    break;
                }
                any_step = true;
            }
        }
        let p_now = trace.final_coverage();
        if !any_step || relative_change(p_now, p_prev) < opt.convergence_tol {
            trace.converged = true;
            break;
        }
        p_prev = p_now;
    }
    Ok((state, trace))
}

/// Best of `starts` random initializations (seeds `opt.seed + k`), run in parallel.
pub fn multi_start_optimize(
    problem: &CoverageProblem<'_>,
    opt: &OptimizerConfig,
    starts: usize,
) -> Result<(PhaseConfig, OptimizerTrace)> {
    let runs: Vec<Result<(PhaseConfig, OptimizerTrace)>> = (0..starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut o = opt.clone();
            if k > 0 {
                o.init = InitPolicy::Random;
                o.seed = opt.seed.wrapping_add(k as u64);
            }
            let init = o.initial_phases(problem.cov.n1(), problem.cov.n2());
            alternate_optimize(&init, problem, &o)
        })
        .collect();
    let mut best: Option<(PhaseConfig, OptimizerTrace)> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.1.final_gamma() > b.1.final_gamma()) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Projected-gradient ascent for the single-surface baseline.
pub fn optimize_single_irs(
    initial: &DVector<Complex64>,
    problem: &SingleProblem<'_>,
    opt: &OptimizerConfig,
) -> Result<(DVector<Complex64>, OptimizerTrace)> {
    opt.validate()?;
    check_unit_modulus(initial)?;
    let (p0, g0) = problem.evaluate(initial)?;
    let mut trace = OptimizerTrace::default();
    trace.records.push(TraceRecord { outer_iter: 0, irs_updated: 0, p_coverage: p0, gamma_bar_eff: g0, step_size: None });
    let mut s = initial.clone();
    let mut p_prev = p0;
    for outer in 1..=opt.max_outer_iterations {
        trace.outer_iterations = outer;
        let mut any_step = false;
        for _ in 0..opt.max_inner_steps {
            let (p_old, g_old) = problem.evaluate(&s)?;
            let q = problem.gradient(&s)?;
            let step = line_search(&s, &q, p_old, g_old, opt, |t| problem.evaluate(t))?;
            trace.records.push(TraceRecord {
                outer_iter: outer,
                irs_updated: 1,
                p_coverage: step.p_coverage,
                gamma_bar_eff: step.gamma_bar_eff,
                step_size: step.step_size,
            });
            if step.step_size.is_none() {
                break;
            }
            s = step.phases;
            any_step = true;
        }
        let p_now = trace.final_coverage();
        if !any_step || relative_change(p_now, p_prev) < opt.convergence_tol {
            trace.converged = true;
            break;
        }
        p_prev = p_now;
    }
    Ok((s, trace))
}
