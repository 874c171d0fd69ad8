//! Coverage probability of links assisted by two cooperating intelligent
//! reflecting surfaces under spatially correlated Rayleigh fading.
//!
//! The pipeline is: a [`Scenario`] fixes geometry and link budgets,
//! [`build_link_covariances`] turns it into sinc-model covariances, the
//! deterministic equivalent [`de_snr_double`] gives the mean SNR for a phase
//! configuration, [`coverage_closed_form`] maps that to a coverage
//! probability, and [`alternate_optimize`] tunes the phases of both
//! surfaces. [`montecarlo`] checks the analytic pieces by simulation.
//!
//! ```
//! use irs_coverage::{build_link_covariances, coverage_closed_form, de_snr_double, PhaseConfig, Scenario};
//!
//! let scenario = Scenario::default().with_split(8, 8)?;
//! let cov = build_link_covariances(&scenario)?;
//! let de = de_snr_double(&cov, &PhaseConfig::ones(8, 8), scenario.gamma0())?;
//! let p = coverage_closed_form(de.value, de.value, 10)?;
//! assert!(p > 0.0 && p < 1.0);
//! # Ok::<(), irs_coverage::Error>(())
//! ```

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod coverage;
pub mod de;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod optimizer;
pub mod scenario;
pub mod table;

pub use correlation::{build_link_covariances, build_uncorrelated_covariances, sinc_correlation, CorrelationMatrix, IrsGeometry, LinkCovarianceSet, LinkGains};
pub use coverage::{alzer_eta, coverage_binomial_sum, coverage_closed_form, AlzerParams};
pub use de::{de_snr_double, de_snr_single, DeSnr, IrsIndex, PhaseConfig};
pub use error::{Error, Result};
pub use experiments::{ExperimentKind, ExperimentSpec};
pub use optimizer::{alternate_optimize, CoverageProblem, OptimizerConfig, OptimizerTrace};
pub use scenario::{Scenario, ScenarioConfig, ThresholdMode};
pub use table::ResultTable;
