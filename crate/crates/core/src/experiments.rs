//! Experiment drivers behind the command-line tool.
//!
//! Each driver returns a [`ResultTable`] whose metadata carries the version,
//! the seed, every resolved configuration key and the experiment parameters,
//! so an output file can be interpreted without the command that made it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    build_link_covariances, build_uncorrelated_covariances, sinc_correlation, CorrelationMatrix, LinkCovarianceSet,
    LinkGains,
};
use crate::coverage::{coverage_binomial_sum, coverage_closed_form, AlzerParams, DEFAULT_M_TERMS};
use crate::de::{de_snr_double, de_snr_single, random_phases, IrsIndex, PhaseConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{coverage_sweep, coverage_sweep_single, mean_snr, term_statistics, Estimate};
use crate::optimizer::{
    alternate_optimize, directional_derivative, multi_start_optimize, optimize_single_irs, CoverageProblem,
    OptimizerConfig, OptimizerTrace, SingleProblem,
};
use crate::scenario::{snr_to_threshold, Scenario, ScenarioConfig, ThresholdMode};
use crate::table::{Cell, Column, ResultTable, VERSION};

/// Default trials for empirical coverage curves.
pub const DEFAULT_COVERAGE_TRIALS: u64 = 100_000;
/// Default trials for the mean-SNR check of `validate`.
pub const DEFAULT_MEAN_TRIALS: u64 = 1_000_000;
/// Number of points of an automatically derived threshold grid.
pub const DEFAULT_GRID_POINTS: usize = 10;
/// Threshold used by the convergence experiment, in b/s/Hz.
pub const CONVERGENCE_RATE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SplitSweep,
    CorrelationComparison,
    ConvergenceTrace,
    SingleVsDouble,
    Validate,
}

impl ExperimentKind {
    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SplitSweep => "split-sweep",
            ExperimentKind::CorrelationComparison => "correlation",
            ExperimentKind::ConvergenceTrace => "convergence",
            ExperimentKind::SingleVsDouble => "single-vs-double",
            ExperimentKind::Validate => "validate",
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub scenario: Scenario,
    /// Total element budget `N`.
    pub total_elements: usize,
    /// IRS 1 sizes. Split sweep: `N1` with `N2 = N - N1`. Convergence: `N1 = N2`.
    pub n1_grid: Vec<usize>,
    /// Thresholds in the scenario's threshold mode; derived automatically when `None`.
    pub thresholds: Option<Vec<f64>>,
    pub grid_points: usize,
    /// Element spacings over wavelength for the correlation comparison.
    pub spacing_grid: Vec<f64>,
    pub include_uncorrelated: bool,
    /// Single-surface baseline sizes for the split sweep.
    pub baseline_sizes: Vec<usize>,
    /// Random phase configurations averaged in the correlation comparison.
    pub random_configs: usize,
    /// Threshold of the convergence experiment (scenario threshold mode).
    pub convergence_threshold: f64,
    /// Monte-Carlo trials per coverage curve; 0 skips the simulation.
    pub trials: u64,
    pub mean_trials: u64,
    pub seed: u64,
    pub m_terms: u32,
    pub optimizer: OptimizerConfig,
    /// Optimizer starts (the first from `optimizer.init`, the rest random).
    pub starts: usize,
    pub paper_scale: bool,
}

impl ExperimentSpec {
    /// Defaults for `kind`. Desk scale uses the scenario's own split
    /// (`N = 64` for the reference configuration); paper scale uses
    /// `N = 200`, or `N = 180` for the correlation comparison.
    pub fn new(experiment: ExperimentKind, scenario: Scenario, paper_scale: bool) -> Self {
        let total = match (paper_scale, experiment) {
            (true, ExperimentKind::CorrelationComparison) => 180,
            (true, _) => 200,
            (false, _) => scenario.total_elements(),
        };
        let n1_grid = match experiment {
            ExperimentKind::ConvergenceTrace if paper_scale => vec![25, 50, 100],
            ExperimentKind::ConvergenceTrace => vec![10, 25],
            ExperimentKind::SplitSweep if paper_scale => vec![20, 40, 60, 80, 100, 120, 140, 160, 180],
            _ => default_split_grid(total),
        };
        let convergence_threshold = snr_to_threshold(
            crate::scenario::threshold_to_snr(CONVERGENCE_RATE, ThresholdMode::TargetRate).expect("positive rate"),
            scenario.threshold_mode,
        );
        ExperimentSpec {
            experiment,
            total_elements: total,
            n1_grid,
            thresholds: None,
            grid_points: DEFAULT_GRID_POINTS,
            spacing_grid: vec![scenario.element_spacing_over_lambda, scenario.element_spacing_over_lambda / 2.0],
            include_uncorrelated: true,
            baseline_sizes: vec![total / 2, total],
            random_configs: 100,
            convergence_threshold,
            trials: DEFAULT_COVERAGE_TRIALS,
            mean_trials: DEFAULT_MEAN_TRIALS,
            seed: 0,
            m_terms: DEFAULT_M_TERMS,
            optimizer: OptimizerConfig::default(),
            starts: 1,
            paper_scale,
            scenario,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.m_terms == 0 {
            return Err(Error::config("m_terms", "must be at least 1"));
        }
        if self.total_elements < 2 {
            return Err(Error::config("total_elements", "need at least two elements to split"));
        }
        match self.experiment {
            ExperimentKind::SplitSweep => {
                if self.n1_grid.is_empty() {
                    return Err(Error::config("n1_grid", "grid is empty"));
                }
                if let Some(&bad) = self.n1_grid.iter().find(|&&n| n == 0 || n >= self.total_elements) {
                    return Err(Error::config(
                        "n1_grid",
                        format!("N1 = {bad} must lie in 1..{}", self.total_elements),
                    ));
                }
                if self.baseline_sizes.contains(&0) {
                    return Err(Error::config("baseline_sizes", "sizes must be positive"));
                }
            }
            ExperimentKind::ConvergenceTrace => {
                if self.n1_grid.is_empty() || self.n1_grid.contains(&0) {
                    return Err(Error::config("n1_grid", "grid must be non-empty with positive sizes"));
                }
            }
            ExperimentKind::CorrelationComparison => {
                if self.spacing_grid.is_empty() && !self.include_uncorrelated {
                    return Err(Error::config("spacing_grid", "grid is empty"));
                }
                if let Some(bad) = self.spacing_grid.iter().find(|&&d| !(d > 0.0)) {
                    return Err(Error::config("spacing_grid", format!("spacing {bad} must be positive")));
                }
            }
            _ => {}
        }
        if let Some(t) = &self.thresholds {
            if t.is_empty() {
                return Err(Error::config("thresholds", "grid is empty"));
            }
            if let Some(bad) = t.iter().find(|&&x| !(x >= 0.0)) {
                return Err(Error::config("thresholds", format!("threshold {bad} must be non-negative")));
            }
        } else if self.grid_points == 0 {
            return Err(Error::config("grid_points", "must be positive"));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<ResultTable> {
        self.validate()?;
        let mut table = match self.experiment {
            ExperimentKind::SplitSweep => run_split_sweep(self),
            ExperimentKind::CorrelationComparison => run_correlation_comparison(self),
            ExperimentKind::ConvergenceTrace => run_convergence_trace(self),
            ExperimentKind::SingleVsDouble => run_single_vs_double(self),
            ExperimentKind::Validate => run_validate(self),
        }?;
        let mut meta = self.metadata();
        meta.append(&mut table.metadata);
        table.metadata = meta;
        Ok(table)
    }

    fn metadata(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("version".to_string(), format!("irs-coverage {VERSION}")),
            ("experiment".to_string(), self.experiment.name().to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        let resolved = toml::to_string(&ScenarioConfig::resolved(&self.scenario)).expect("config serializes");
        for line in resolved.lines().filter(|l| !l.trim().is_empty()) {
            m.push(("config".to_string(), line.to_string()));
        }
        let opt = &self.optimizer;
        let params: Vec<(&str, String)> = vec![
            ("paper_scale", self.paper_scale.to_string()),
            ("total_elements", self.total_elements.to_string()),
            ("n1_grid", join(&self.n1_grid)),
            ("thresholds", self.thresholds.as_ref().map_or("auto".to_string(), |t| join(t))),
            ("grid_points", self.grid_points.to_string()),
            ("spacing_grid", join(&self.spacing_grid)),
            ("include_uncorrelated", self.include_uncorrelated.to_string()),
            ("baseline_sizes", join(&self.baseline_sizes)),
            ("random_configs", self.random_configs.to_string()),
            ("convergence_threshold", self.convergence_threshold.to_string()),
            ("trials", self.trials.to_string()),
            ("mean_trials", self.mean_trials.to_string()),
            ("m_terms", self.m_terms.to_string()),
            ("starts", self.starts.to_string()),
            ("max_outer_iterations", opt.max_outer_iterations.to_string()),
            ("max_inner_steps", opt.max_inner_steps.to_string()),
            ("convergence_tol", opt.convergence_tol.to_string()),
            ("initial_step", opt.initial_step.to_string()),
            ("shrink", opt.shrink.to_string()),
            ("sufficient_increase", opt.sufficient_increase.to_string()),
            ("init", format!("{:?}", opt.init).to_lowercase()),
        ];
        for (k, v) in params {
            m.push(("param".to_string(), format!("{k} = {v}")));
        }
        m
    }

    fn alzer(&self) -> Result<AlzerParams> {
        AlzerParams::new(self.m_terms)
    }

    fn mode(&self) -> ThresholdMode {
        self.scenario.threshold_mode
    }

    /// Thresholds (scenario units) and matching linear SNR thresholds.
    fn threshold_grid(&self, reference_gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let thresholds = match &self.thresholds {
            Some(t) => t.clone(),
            None => auto_thresholds(reference_gamma, self.grid_points, &self.alzer()?, self.mode())?,
        };
        let taus = thresholds.iter().map(|&t| self.scenario.tau(t)).collect::<Result<Vec<_>>>()?;
        Ok((thresholds, taus))
    }
}

/// `N/8, N/4, N/2, 3N/4, 7N/8`, without duplicates or empty surfaces.
pub fn default_split_grid(total: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = [total / 8, total / 4, total / 2, total * 3 / 4, total * 7 / 8]
        .into_iter()
        .filter(|&n| n > 0 && n < total)
        .collect();
    grid.dedup();
    grid
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Thresholds at which a link with effective DE SNR `reference_gamma` has
/// analytic coverage evenly spaced from 0.95 down to 0.05.
pub fn auto_thresholds(
    reference_gamma: f64,
    points: usize,
    alzer: &AlzerParams,
    mode: ThresholdMode,
) -> Result<Vec<f64>> {
    if !(reference_gamma > 0.0) {
        return Err(Error::Domain(format!("reference DE SNR must be positive, got {reference_gamma}")));
    }
    (0..points)
        .map(|k| {
            let p = if points == 1 { 0.5 } else { 0.95 - 0.9 * k as f64 / (points - 1) as f64 };
            Ok(snr_to_threshold(reference_gamma * alzer.normalized_threshold(p)?, mode))
        })
        .collect()
}

/// Result of optimizing one double-surface configuration.
#[derive(Debug, Clone)]
pub struct DoubleOutcome {
    pub phases: PhaseConfig,
    pub trace: OptimizerTrace,
    pub de_snr: f64,
}

/// Threshold at which the starting phases give 50 % analytic coverage.
///
/// The coverage gradient is a positive multiple of the DE SNR gradient at
/// every threshold, so the optimum does not depend on it; the mid-range
/// value only keeps the slope away from underflow.
fn design_tau(gamma_init: f64, alzer: &AlzerParams) -> Result<f64> {
    if gamma_init > 0.0 {
        Ok(gamma_init * alzer.normalized_threshold(0.5)?)
    } else {
        Ok(0.0)
    }
}

/// Optimizes both surfaces of `cov` and reports the resulting DE SNR.
pub fn optimize_double(cov: &LinkCovarianceSet, gamma0: f64, spec: &ExperimentSpec) -> Result<DoubleOutcome> {
    let alzer = spec.alzer()?;
    let init = spec.optimizer.initial_phases(cov.n1(), cov.n2());
    let tau = design_tau(de_snr_double(cov, &init, gamma0)?.value, &alzer)?;
    let problem = CoverageProblem::new(cov, gamma0, tau, spec.m_terms)?;
    let (phases, trace) = if spec.starts > 1 {
        multi_start_optimize(&problem, &spec.optimizer, spec.starts)?
    } else {
        alternate_optimize(&init, &problem, &spec.optimizer)?
    };
    let de_snr = de_snr_double(cov, &phases, gamma0)?.value;
    Ok(DoubleOutcome { phases, trace, de_snr })
}

/// Single-surface baseline with `n` elements at the IRS 2 location.
#[derive(Debug, Clone)]
pub struct SingleOutcome {
    pub r_t: CorrelationMatrix,
    pub r_r: CorrelationMatrix,
    pub phases: DVector<Complex64>,
    pub trace: OptimizerTrace,
    pub de_snr: f64,
}

/// Covariances `(R_t, R_r)` of the single-surface baseline.
pub fn baseline_covariances(scenario: &Scenario, n: usize, correlated: bool) -> Result<(CorrelationMatrix, CorrelationMatrix)> {
    let geometry = scenario.baseline_geometry(n)?;
    let r = if correlated { sinc_correlation(&geometry) } else { CorrelationMatrix::uncorrelated(&geometry) };
    let (bt, br) = scenario.baseline_pathloss();
    Ok((r.scaled(bt), r.scaled(br)))
}

pub fn optimize_single(scenario: &Scenario, n: usize, correlated: bool, spec: &ExperimentSpec) -> Result<SingleOutcome> {
    let (r_t, r_r) = baseline_covariances(scenario, n, correlated)?;
    let gamma0 = scenario.gamma0();
    let init = spec.optimizer.initial_single(n);
    let tau = design_tau(de_snr_single(&r_t, &r_r, &init, gamma0)?.value, &spec.alzer()?)?;
    let problem = SingleProblem::new(&r_t, &r_r, gamma0, tau, spec.m_terms)?;
    let (phases, trace) = optimize_single_irs(&init, &problem, &spec.optimizer)?;
    let de_snr = de_snr_single(&r_t, &r_r, &phases, gamma0)?.value;
    Ok(SingleOutcome { r_t, r_r, phases, trace, de_snr })
}

fn analytic(taus: &[f64], gamma: f64, m: u32) -> Result<Vec<f64>> {
    taus.iter().map(|&t| coverage_closed_form(t, gamma, m)).collect()
}

fn mc_double(cov: &LinkCovarianceSet, phases: &PhaseConfig, gamma0: f64, taus: &[f64], spec: &ExperimentSpec) -> Result<Vec<Option<Estimate>>> {
    if spec.trials == 0 {
        return Ok(vec![None; taus.len()]);
    }
    Ok(coverage_sweep(cov, phases, gamma0, taus, spec.trials, spec.seed)?.into_iter().map(Some).collect())
}

fn mc_single(single: &SingleOutcome, gamma0: f64, taus: &[f64], spec: &ExperimentSpec) -> Result<Vec<Option<Estimate>>> {
    if spec.trials == 0 {
        return Ok(vec![None; taus.len()]);
    }
    Ok(coverage_sweep_single(&single.r_t, &single.r_r, &single.phases, gamma0, taus, spec.trials, spec.seed)?
        .into_iter()
        .map(Some)
        .collect())
}

fn est_cells(e: Option<Estimate>) -> [Cell; 2] {
    [e.map(|e| e.value).into(), e.map(|e| e.stderr).into()]
}

/// Indices of the grid points whose thresholds sit in the middle third.
pub fn mid_range(len: usize) -> std::ops::Range<usize> {
    if len < 3 {
        0..len
    } else {
        len / 3..len - len / 3
    }
}

/// Coverage versus threshold for each `N1` of the grid at fixed `N`, plus
/// single-surface baselines.
pub fn run_split_sweep(spec: &ExperimentSpec) -> Result<ResultTable> {
    let n = spec.total_elements;
    let gamma0 = spec.scenario.gamma0();
    let reference = {
        let sc = spec.scenario.with_split(n / 2, n - n / 2)?;
        optimize_double(&build_link_covariances(&sc)?, gamma0, spec)?.de_snr
    };
    let (thresholds, taus) = spec.threshold_grid(reference)?;
    let mut table = ResultTable::new(vec![
        Column::text("system"),
        Column::int("n_total"),
        Column::int("n1"),
        Column::int("n2"),
        Column::float("threshold"),
        Column::float("threshold_snr"),
        Column::float("de_snr"),
        Column::float("p_analytic"),
        Column::float("p_empirical"),
        Column::float("p_stderr"),
    ]);
    let blocks: Vec<Result<Vec<Vec<Cell>>>> = spec
        .n1_grid
        .par_iter()
        .map(|&n1| {
            let sc = spec.scenario.with_split(n1, n - n1)?;
            let cov = build_link_covariances(&sc)?;
            let out = optimize_double(&cov, gamma0, spec)?;
            let p = analytic(&taus, out.de_snr, spec.m_terms)?;
            let mc = mc_double(&cov, &out.phases, gamma0, &taus, spec)?;
            Ok((0..taus.len())
                .map(|k| {
                    let mut row: Vec<Cell> = vec![
                        "double".into(),
                        n.into(),
                        n1.into(),
                        (n - n1).into(),
                        thresholds[k].into(),
                        taus[k].into(),
                        out.de_snr.into(),
                        p[k].into(),
                    ];
                    row.extend(est_cells(mc[k]));
                    row
                })
                .collect())
        })
        .collect();
    for b in blocks {
        for row in b? {
            table.push_row(row);
        }
    }
    for &size in &spec.baseline_sizes {
        let single = optimize_single(&spec.scenario, size, true, spec)?;
        let p = analytic(&taus, single.de_snr, spec.m_terms)?;
        let mc = mc_single(&single, gamma0, &taus, spec)?;
        for k in 0..taus.len() {
            let mut row: Vec<Cell> = vec![
                "single".into(),
                size.into(),
                size.into(),
                0usize.into(),
                thresholds[k].into(),
                taus[k].into(),
                single.de_snr.into(),
                p[k].into(),
            ];
            row.extend(est_cells(mc[k]));
            table.push_row(row);
        }
    }
    Ok(table)
}

fn random_phase_mean(
    cov: &LinkCovarianceSet,
    gamma0: f64,
    taus: &[f64],
    spec: &ExperimentSpec,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let count = spec.random_configs.max(1);
    let mut de = 0.0;
    let mut p = vec![0.0; taus.len()];
    for _ in 0..count {
        let phases = PhaseConfig::random(cov.n1(), cov.n2(), &mut rng);
        let g = de_snr_double(cov, &phases, gamma0)?.value;
        de += g;
        for (acc, v) in p.iter_mut().zip(analytic(taus, g, spec.m_terms)?) {
            *acc += v;
        }
    }
    let c = count as f64;
    Ok((de / c, p.into_iter().map(|x| x / c).collect()))
}

fn random_phase_mean_single(
    r_t: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    gamma0: f64,
    taus: &[f64],
    spec: &ExperimentSpec,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let count = spec.random_configs.max(1);
    let mut de = 0.0;
    let mut p = vec![0.0; taus.len()];
    for _ in 0..count {
        let phases = random_phases(r_t.dim(), &mut rng);
        let g = de_snr_single(r_t, r_r, &phases, gamma0)?.value;
        de += g;
        for (acc, v) in p.iter_mut().zip(analytic(taus, g, spec.m_terms)?) {
            *acc += v;
        }
    }
    let c = count as f64;
    Ok((de / c, p.into_iter().map(|x| x / c).collect()))
}

/// Optimized against random phases, correlated against uncorrelated
/// surfaces, for the double link and a single surface of the same size.
///
/// Random-phase rows report the analytic coverage averaged over
/// `random_configs` draws; they have no empirical column.
pub fn run_correlation_comparison(spec: &ExperimentSpec) -> Result<ResultTable> {
    let n = spec.total_elements;
    let (n1, n2) = (n / 2, n - n / 2);
    let gamma0 = spec.scenario.gamma0();
    let base = spec.scenario.with_split(n1, n2)?;
    // (label, spacing, scenario, covariances)
    let mut conditions = Vec::new();
    for &d in &spec.spacing_grid {
        let sc = base.with_spacing(d)?;
        let cov = build_link_covariances(&sc)?;
        conditions.push(("sinc", d, sc, cov));
    }
    if spec.include_uncorrelated {
        let cov = build_uncorrelated_covariances(&base)?;
        conditions.push(("none", base.element_spacing_over_lambda, base.clone(), cov));
    }
    let optimized: Vec<DoubleOutcome> = conditions
        .par_iter()
        .map(|(_, _, _, cov)| optimize_double(cov, gamma0, spec))
        .collect::<Result<_>>()?;
    let (thresholds, taus) = spec.threshold_grid(optimized[0].de_snr)?;
    let mut table = ResultTable::new(vec![
        Column::text("system"),
        Column::text("phases"),
        Column::text("correlation"),
        Column::float("spacing_over_lambda"),
        Column::float("threshold"),
        Column::float("threshold_snr"),
        Column::float("de_snr"),
        Column::float("p_analytic"),
        Column::float("p_empirical"),
        Column::float("p_stderr"),
    ]);
    let mut opt_curves = Vec::new();
    for ((label, d, sc, cov), out) in conditions.iter().zip(&optimized) {
        let p = analytic(&taus, out.de_snr, spec.m_terms)?;
        let mc = mc_double(cov, &out.phases, gamma0, &taus, spec)?;
        let (rand_de, rand_p) = random_phase_mean(cov, gamma0, &taus, spec)?;
        let correlated = *label == "sinc";
        let single = optimize_single(sc, n, correlated, spec)?;
        let single_p = analytic(&taus, single.de_snr, spec.m_terms)?;
        let single_mc = mc_single(&single, gamma0, &taus, spec)?;
        let (single_rand_de, single_rand_p) = random_phase_mean_single(&single.r_t, &single.r_r, gamma0, &taus, spec)?;
        #[allow(clippy::type_complexity)]
        let blocks: [(&str, &str, f64, &[f64], &[Option<Estimate>]); 4] = [
            ("double", "optimized", out.de_snr, &p, &mc),
            ("double", "random", rand_de, &rand_p, &[]),
            ("single", "optimized", single.de_snr, &single_p, &single_mc),
            ("single", "random", single_rand_de, &single_rand_p, &[]),
        ];
        for (system, phases, de, ps, est) in blocks {
            for k in 0..taus.len() {
                let mut row: Vec<Cell> = vec![
                    system.into(),
                    phases.into(),
                    (*label).into(),
                    (*d).into(),
                    thresholds[k].into(),
                    taus[k].into(),
                    de.into(),
                    ps[k].into(),
                ];
                row.extend(est_cells(est.get(k).copied().flatten()));
                table.push_row(row);
            }
        }
        if correlated {
            opt_curves.push((*d, p));
        }
    }
    // soft check: denser packing (more correlation) should not raise coverage
    for i in 0..opt_curves.len() {
        for j in 0..opt_curves.len() {
            let ((di, pi), (dj, pj)) = (&opt_curves[i], &opt_curves[j]);
            if di < dj && mid_range(taus.len()).any(|k| pi[k] > pj[k]) {
                table.add_meta(
                    "warning",
                    format!("optimized coverage at spacing {di} exceeds spacing {dj} at a mid-range threshold"),
                );
            }
        }
    }
    Ok(table)
}

/// Optimizer traces at the convergence threshold for `N1 = N2 = n`, `n` in the grid.
pub fn run_convergence_trace(spec: &ExperimentSpec) -> Result<ResultTable> {
    let gamma0 = spec.scenario.gamma0();
    let tau = spec.scenario.tau(spec.convergence_threshold)?;
    let traces: Vec<OptimizerTrace> = spec
        .n1_grid
        .par_iter()
        .map(|&n| {
            let sc = spec.scenario.with_split(n, n)?;
            let cov = build_link_covariances(&sc)?;
            let problem = CoverageProblem::new(&cov, gamma0, tau, spec.m_terms)?;
            let (_, trace) = if spec.starts > 1 {
                multi_start_optimize(&problem, &spec.optimizer, spec.starts)?
            } else {
                alternate_optimize(&spec.optimizer.initial_phases(n, n), &problem, &spec.optimizer)?
            };
            Ok(trace)
        })
        .collect::<Result<_>>()?;
    let mut table = ResultTable::new(vec![
        Column::int("n1"),
        Column::int("n2"),
        Column::int("outer_iter"),
        Column::int("irs_updated"),
        Column::float("p_coverage"),
        Column::float("gamma_bar_eff"),
        Column::float("step_size"),
        Column::int("converged"),
        Column::int("outer_iterations"),
    ]);
    for (&n, trace) in spec.n1_grid.iter().zip(&traces) {
        for r in &trace.records {
            table.push_row(vec![
                n.into(),
                n.into(),
                r.outer_iter.into(),
                (r.irs_updated as usize).into(),
                r.p_coverage.into(),
                r.gamma_bar_eff.into(),
                r.step_size.into(),
                (trace.converged as usize).into(),
                trace.outer_iterations.into(),
            ]);
        }
        if !trace.is_monotone() {
            table.add_meta("warning", format!("trace for N1 = {n} is not monotone"));
        }
        if !trace.converged {
            table.add_meta("warning", format!("N1 = {n} did not converge in {} outer iterations", trace.outer_iterations));
        }
    }
    let mut order: Vec<(usize, usize)> = spec.n1_grid.iter().copied().zip(traces.iter().map(|t| t.outer_iterations)).collect();
    order.sort();
    if order.windows(2).any(|w| w[1].1 < w[0].1) {
        table.add_meta("warning", "a larger surface converged in fewer iterations than a smaller one");
    }
    Ok(table)
}

/// Optimized double link (`N/2 + N/2`) against an optimized single surface of `N` elements.
pub fn run_single_vs_double(spec: &ExperimentSpec) -> Result<ResultTable> {
    let n = spec.total_elements;
    let gamma0 = spec.scenario.gamma0();
    let sc = spec.scenario.with_split(n / 2, n - n / 2)?;
    let cov = build_link_covariances(&sc)?;
    let double = optimize_double(&cov, gamma0, spec)?;
    let single = optimize_single(&spec.scenario, n, true, spec)?;
    let (thresholds, taus) = spec.threshold_grid(double.de_snr)?;
    let pd = analytic(&taus, double.de_snr, spec.m_terms)?;
    let ps = analytic(&taus, single.de_snr, spec.m_terms)?;
    let md = mc_double(&cov, &double.phases, gamma0, &taus, spec)?;
    let ms = mc_single(&single, gamma0, &taus, spec)?;
    let mut table = ResultTable::new(vec![
        Column::float("threshold"),
        Column::float("threshold_snr"),
        Column::float("de_double"),
        Column::float("p_double"),
        Column::float("p_double_empirical"),
        Column::float("p_double_stderr"),
        Column::float("de_single"),
        Column::float("p_single"),
        Column::float("p_single_empirical"),
        Column::float("p_single_stderr"),
    ]);
    for k in 0..taus.len() {
        let mut row: Vec<Cell> = vec![thresholds[k].into(), taus[k].into(), double.de_snr.into(), pd[k].into()];
        row.extend(est_cells(md[k]));
        row.extend([single.de_snr.into(), ps[k].into()]);
        row.extend(est_cells(ms[k]));
        table.push_row(row);
    }
    if pd.iter().zip(&ps).any(|(d, s)| d < s) {
        table.add_meta("warning", "single surface beats the double link at some threshold");
    }
    Ok(table)
}

/// Random Hermitian PSD matrix with unit average diagonal.
pub fn random_covariance<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CorrelationMatrix {
    let x = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &x * x.adjoint();
    let scale = n as f64 / m.trace().re;
    CorrelationMatrix::new(m * Complex64::new(scale, 0.0) + DMatrix::identity(n, n) * Complex64::new(0.05, 0.0))
        .expect("Gram matrix is Hermitian")
}

/// Random link gains in `[0.2, 1)`.
pub fn random_gains<R: Rng + ?Sized>(rng: &mut R) -> LinkGains {
    let mut g = || 0.2 + 0.8 * rng.random::<f64>();
    LinkGains { t1: g(), l12: g(), l2r: g(), l1r: g(), t2: g() }
}

/// Largest relative error between the analytic directional derivative of
/// the coverage and a central difference in the phase angles, over random
/// problems with `N1, N2` in {4, 8}.
pub fn gradient_check(instances: usize, directions: usize, seed: u64, m_terms: u32) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alzer = AlzerParams::new(m_terms)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (n1, n2) = ([4, 8][i % 2], [4, 8][(i / 2) % 2]);
        let cov = LinkCovarianceSet::new(random_covariance(n1, &mut rng), random_covariance(n2, &mut rng), random_gains(&mut rng))?;
        let phases = PhaseConfig::random(n1, n2, &mut rng);
        let gamma0 = 1.0;
        let tau = de_snr_double(&cov, &phases, gamma0)?.value * alzer.normalized_threshold(0.5)?;
        let problem = CoverageProblem::new(&cov, gamma0, tau, m_terms)?;
        for which in [IrsIndex::One, IrsIndex::Two] {
            let q = problem.gradient(which, &phases)?;
            let s = phases.block(which).clone();
            for _ in 0..directions {
                let delta: Vec<f64> = (0..s.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                // d/dt s_m e^{j t delta_m} at t = 0
                let dir = DVector::from_fn(s.len(), |m, _| s[m] * Complex64::new(0.0, delta[m]));
                let analytic = directional_derivative(&q, &dir);
                let at = |t: f64| -> Result<f64> {
                    let moved = DVector::from_fn(s.len(), |m, _| s[m] * Complex64::from_polar(1.0, t * delta[m]));
                    Ok(problem.evaluate(&phases.with_block(which, moved)?)?.0)
                };
                let fd = (at(h)? - at(-h)?) / (2.0 * h);
                worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-300));
            }
        }
    }
    Ok(worst)
}

fn check_row(table: &mut ResultTable, name: &str, value: f64, reference: f64, tolerance: f64, pass: bool) {
    table.push_row(vec![
        name.into(),
        value.into(),
        reference.into(),
        tolerance.into(),
        if pass { "pass" } else { "fail" }.into(),
    ]);
}

/// One-command oracle suite. Failed checks are reported in the table, not
/// raised as errors.
pub fn run_validate(spec: &ExperimentSpec) -> Result<ResultTable> {
    let mut table = ResultTable::new(vec![
        Column::text("check"),
        Column::float("value"),
        Column::float("reference"),
        Column::float("tolerance"),
        Column::text("status"),
    ]);
    let gamma0 = spec.scenario.gamma0();
    let m = spec.m_terms;

    // DE mean against Monte Carlo, 8 + 8 elements, random phases
    let small = spec.scenario.with_split(8, 8)?;
    let cov = build_link_covariances(&small)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases = PhaseConfig::random(8, 8, &mut rng);
    let de = de_snr_double(&cov, &phases, gamma0)?.value;
    if spec.mean_trials > 0 {
        let mc = mean_snr(&cov, &phases, gamma0, spec.mean_trials, spec.seed)?.mean_snr;
        let tol = 3.0 * mc.stderr;
        check_row(&mut table, "de_mean_8x8", mc.value, de, tol, (mc.value - de).abs() <= tol);

        // the cross terms average to zero; random covariances make all three terms comparable
        let cov_r = LinkCovarianceSet::new(random_covariance(8, &mut rng), random_covariance(8, &mut rng), random_gains(&mut rng))?;
        let stats = term_statistics(&cov_r, &phases, 1.0, spec.mean_trials, spec.seed)?;
        for (name, e) in [
            ("cross_single1_double", stats.cross_single_1_double),
            ("cross_single1_single2", stats.cross_single_1_single_2),
            ("cross_single2_double", stats.cross_single_2_double),
        ] {
            check_row(&mut table, name, e.value, 0.0, 3.0 * e.stderr, e.value.abs() <= 3.0 * e.stderr);
        }
    }

    // binomial sum against product form
    let mut worst: f64 = 0.0;
    for mi in [1, 2, 5, 10, 30] {
        for k in 0..=80 {
            let x = 10f64.powf(-6.0 + 8.0 * k as f64 / 80.0);
            worst = worst.max((coverage_binomial_sum(x, 1.0, mi)? - coverage_closed_form(x, 1.0, mi)?).abs());
        }
    }
    check_row(&mut table, "form_identity", worst, 0.0, 1e-9, worst < 1e-9);

    let p0 = coverage_closed_form(0.0, de, m)?;
    check_row(&mut table, "tau_zero_coverage", p0, 1.0, 0.0, p0 == 1.0);

    let g = gradient_check(20, 10, spec.seed, m)?;
    check_row(&mut table, "gradient_finite_difference", g, 0.0, 1e-4, g <= 1e-4);

    // analytic against empirical coverage along an automatic grid
    if spec.trials > 0 {
        let n = spec.scenario.total_elements();
        let sc = spec.scenario.with_split(n / 2, n - n / 2)?;
        let cov = build_link_covariances(&sc)?;
        let out = optimize_double(&cov, gamma0, spec)?;
        let taus: Vec<f64> = auto_thresholds(out.de_snr, DEFAULT_GRID_POINTS, &spec.alzer()?, ThresholdMode::SnrDirect)?;
        let p = analytic(&taus, out.de_snr, m)?;
        let mc = coverage_sweep(&cov, &out.phases, gamma0, &taus, spec.trials, spec.seed)?;
        let gap = p.iter().zip(&mc).map(|(a, e)| (a - e.value).abs()).fold(0.0, f64::max);
        check_row(&mut table, "coverage_analytic_vs_empirical", gap, 0.0, 0.02, gap <= 0.02);
    }
    Ok(table)
}
