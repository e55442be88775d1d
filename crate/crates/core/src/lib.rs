//! Simulation and verification toolkit for compound renewal processes under
//! a change of measure.
//!
//! A compound renewal process (CRP) aggregates i.i.d. claim sizes at the
//! arrival instants of a renewal counting process. This crate provides:
//!
//! * [`distributions`] — positive-support parametric laws (exponential,
//!   gamma, Weibull) with exact densities, CDFs, samplers and transforms;
//! * [`process`] — the canonical path simulator and path evaluation
//!   (`N_t`, `S_t`, surplus);
//! * [`tilt`] — claim-size tilts, the likelihood-ratio densities that map
//!   one CRP law onto another, and the CRP-to-compound-Poisson conversion;
//! * [`renewal`] — numerical renewal functions and the Poisson linearity
//!   test `E[N_t] = t/E[W]`;
//! * [`montecarlo`] — importance-sampling estimators, empirical martingale
//!   certification and weighted goodness-of-fit tests;
//! * [`scenario`] — a catalog of built-in example configurations and the
//!   check-suite runner behind the `crp` command-line tool.
//!
//! Every estimator is a pure function of its inputs and a `u64` seed;
//! identical inputs produce bit-identical results regardless of thread count.

pub mod distributions;
pub mod montecarlo;
pub mod process;
pub mod quad;
pub mod renewal;
pub mod scenario;
pub mod tilt;

pub use distributions::{DistError, ParamDistribution};
pub use montecarlo::{
    direct_expectation, is_expectation, martingale_check, surplus_martingale_check, weighted_ks,
    ChangeOfMeasure, EstimatorResult, KsReport, MartingaleReport, McError,
};
pub use process::{sample_path, MeasureSpec, Path, ProcessError};
pub use renewal::{lst_relation_check, poisson_linearity_report, renewal_mean};
pub use scenario::{builtin_scenarios, run_scenario, CheckRow, RunOptions, Scenario};
pub use tilt::{
    build_target_measure, convert_to_cpp, esscher_tilt, rpm_log_density, rrm_log_density,
    tilt_from_density_ratio, tilted_claim_law, validate_tilt, BetaTilt, ClaimTilt, EvalError,
    TiltError, TiltReport,
};
