//! `irscov`: experiment runner for double-IRS coverage analysis.
//!
//! Exit codes: 0 success, 1 configuration or runtime error, 2 a `validate`
//! check failed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irs_coverage::correlation::sinc_correlation;
use irs_coverage::experiments::default_split_grid;
use irs_coverage::optimizer::InitPolicy;
use irs_coverage::{Error, ExperimentKind, ExperimentSpec, ResultTable, Scenario, ScenarioConfig, ThresholdMode};

#[derive(Debug, Parser)]
#[command(name = "irscov", version, about = "Coverage analysis and phase optimization for double-IRS links")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat key-value scenario file (TOML syntax).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Monte-Carlo trials per coverage curve (0 skips simulation).
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Trials for the mean-SNR and cross-term checks of `validate`.
    #[arg(long, global = true)]
    mean_trials: Option<u64>,

    /// CSV output path; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Also write the table as JSON to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Use the full element counts (N = 200, or 180 for `correlation`).
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Terms of the gamma approximation in the coverage formula.
    #[arg(long, global = true)]
    m_terms: Option<u32>,

    /// Overrides the scenario's threshold interpretation.
    #[arg(long, global = true, value_enum)]
    threshold_mode: Option<ModeArg>,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Explicit threshold grid in the active threshold mode, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,

    /// Number of points of the automatic threshold grid.
    #[arg(long, global = true)]
    grid_points: Option<usize>,

    /// Initial phases for the optimizer.
    #[arg(long, global = true, value_enum)]
    init: Option<InitArg>,

    /// Optimizer starts; extra starts use random phases.
    #[arg(long, global = true)]
    starts: Option<usize>,

    #[arg(long, global = true)]
    max_outer_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Rate,
    Snr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitArg {
    Ones,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coverage versus threshold while varying how N is split between the surfaces.
    SplitSweep {
        /// IRS 1 sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        n1: Option<Vec<usize>>,
        /// Total element count.
        #[arg(long)]
        n_total: Option<usize>,
        /// Single-surface baseline sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<usize>>,
    },
    /// Optimized and random phases under correlated and uncorrelated fading.
    Correlation {
        /// Element spacings over wavelength, comma separated.
        #[arg(long, value_delimiter = ',')]
        spacings: Option<Vec<f64>>,
        #[arg(long)]
        no_uncorrelated: bool,
        #[arg(long)]
        n_total: Option<usize>,
        /// Random phase draws averaged per curve.
        #[arg(long)]
        random_configs: Option<usize>,
        /// Write the IRS 1 correlation matrix as CSV to this path.
        #[arg(long, value_name = "PATH")]
        export_matrix: Option<PathBuf>,
    },
    /// Optimizer traces for N1 = N2 = n.
    Convergence {
        #[arg(long, value_delimiter = ',')]
        n1: Option<Vec<usize>>,
        /// Threshold in the active threshold mode (default 5 b/s/Hz).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Optimized double link against an optimized single surface of equal size.
    SingleVsDouble {
        #[arg(long)]
        n_total: Option<usize>,
    },
    /// Runs the oracle checks; exits with 2 when any fails.
    Validate,
}

fn load_scenario(global: &Global) -> irs_coverage::Result<Scenario> {
    let mut config = match &global.config {
        Some(path) => ScenarioConfig::from_path(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(mode) = global.threshold_mode {
        config.threshold_mode = Some(match mode {
            ModeArg::Rate => ThresholdMode::TargetRate,
            ModeArg::Snr => ThresholdMode::SnrDirect,
        });
    }
    config.build()
}

fn build_spec(cli: &Cli, scenario: Scenario) -> irs_coverage::Result<ExperimentSpec> {
    let g = &cli.global;
    let kind = match cli.command {
        Command::SplitSweep { .. } => ExperimentKind::SplitSweep,
        Command::Correlation { .. } => ExperimentKind::CorrelationComparison,
        Command::Convergence { .. } => ExperimentKind::ConvergenceTrace,
        Command::SingleVsDouble { .. } => ExperimentKind::SingleVsDouble,
        Command::Validate => ExperimentKind::Validate,
    };
    let mut spec = ExperimentSpec::new(kind, scenario, g.paper_scale);
    spec.seed = g.seed;
    spec.optimizer.seed = g.seed;
    if let Some(t) = g.trials {
        spec.trials = t;
    }
    if let Some(t) = g.mean_trials {
        spec.mean_trials = t;
    }
    if let Some(m) = g.m_terms {
        spec.m_terms = m;
    }
    if let Some(t) = &g.thresholds {
        spec.thresholds = Some(t.clone());
    }
    if let Some(k) = g.grid_points {
        spec.grid_points = k;
    }
    if let Some(init) = g.init {
        spec.optimizer.init = match init {
            InitArg::Ones => InitPolicy::Ones,
            InitArg::Random => InitPolicy::Random,
        };
    }
    if let Some(s) = g.starts {
        if s == 0 {
            return Err(Error::config("starts", "must be at least 1"));
        }
        spec.starts = s;
    }
    if let Some(k) = g.max_outer_iterations {
        spec.optimizer.max_outer_iterations = k;
    }
    match &cli.command {
        Command::SplitSweep { n1, n_total, baselines } => {
            if let Some(n) = n_total {
                spec.total_elements = *n;
                spec.baseline_sizes = vec![n / 2, *n];
                spec.n1_grid = default_split_grid(*n);
            }
            if let Some(v) = n1 {
                spec.n1_grid = v.clone();
            }
            if let Some(b) = baselines {
                spec.baseline_sizes = b.clone();
            }
        }
        Command::Correlation { spacings, no_uncorrelated, n_total, random_configs, .. } => {
            if let Some(s) = spacings {
                spec.spacing_grid = s.clone();
            }
            spec.include_uncorrelated = !no_uncorrelated;
            if let Some(n) = n_total {
                spec.total_elements = *n;
            }
            if let Some(r) = random_configs {
                spec.random_configs = *r;
            }
        }
        Command::Convergence { n1, threshold } => {
            if let Some(v) = n1 {
                spec.n1_grid = v.clone();
            }
            if let Some(t) = threshold {
                spec.convergence_threshold = *t;
            }
        }
        Command::SingleVsDouble { n_total } => {
            if let Some(n) = n_total {
                spec.total_elements = *n;
            }
        }
        Command::Validate => {}
    }
    spec.validate()?;
    Ok(spec)
}

fn write_file(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)
}

fn emit(table: &ResultTable, global: &Global) -> irs_coverage::Result<()> {
    let csv = table.to_csv_string();
    match &global.out {
        Some(path) => write_file(path, &csv)?,
        None => io::stdout().write_all(csv.as_bytes())?,
    }
    if let Some(path) = &global.json {
        write_file(path, &table.to_json()?)?;
    }
    Ok(())
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(cli: &Cli) -> irs_coverage::Result<ExitCode> {
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("workers", e.to_string()))?;
    }
    let scenario = load_scenario(&cli.global)?;
    let spec = build_spec(cli, scenario)?;
    if let Command::Correlation { export_matrix: Some(path), .. } = &cli.command {
        let n = spec.total_elements;
        let sc = spec.scenario.with_split(n / 2, n - n / 2)?;
        let mut buf = Vec::new();
        sinc_correlation(&sc.irs1_geometry).write_csv(&mut buf)?;
        write_file(path, &String::from_utf8_lossy(&buf))?;
    }
    let mut table = spec.run()?;
    table.add_meta("generated_unix", timestamp());
    for w in table.warnings() {
        eprintln!("warning: {w}");
    }
    emit(&table, &cli.global)?;
    let failed = table.failed_checks();
    if failed > 0 {
        eprintln!("{failed} validation check(s) failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
