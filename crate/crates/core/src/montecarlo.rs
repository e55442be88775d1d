//! Importance-sampling estimators, empirical martingale certification and
//! weighted goodness-of-fit — the statistical referee for the likelihood
//! ratios in [`crate::tilt`].
//!
//! Path generation is map-reduce parallel: path `i` owns the ChaCha
//! substream with nonce `i` under the run's seed, and reductions are
//! fixed-order pairwise sums, so every estimator is a pure function of
//! `(inputs, seed)` regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::ParamDistribution;
use crate::process::{sample_path, MeasureSpec, Path};
use crate::tilt::{rpm_log_density, rrm_log_density_laws, BetaTilt, ClaimTilt, EvalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("need at least {min} paths, got {got}")]
    TooFewPaths { got: usize, min: usize },
    #[error("{excluded} of {n_paths} paths hit degenerate tails (> 0.1% budget)")]
    TooManyExclusions { excluded: usize, n_paths: usize },
    #[error("need at least {min} samples, got {got}")]
    InsufficientSamples { got: usize, min: usize },
    #[error("weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Monte-Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// The Radon–Nikodým density used to reweight source-measure paths.
#[derive(Debug, Clone)]
pub enum ChangeOfMeasure {
    /// General renewal target: interarrival ratio plus claim tilt.
    Rrm { target_interarrival: ParamDistribution, tilt: ClaimTilt },
    /// Compound Poisson target expressed through `β = γ + α`.
    Rpm { beta: BetaTilt },
}

impl ChangeOfMeasure {
    pub fn log_density(&self, path: &Path, t: f64, source: &MeasureSpec) -> Result<f64, EvalError> {
        match self {
            Self::Rrm { target_interarrival, tilt } => {
                rrm_log_density_laws(path, t, &source.interarrival, target_interarrival, tilt)
            }
            Self::Rpm { beta } => rpm_log_density(path, t, source, beta),
        }
    }
}

/// The private substream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fixed-order pairwise summation.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let devs: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&devs) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

const MIN_PATHS: usize = 1_000;
const EXCLUSION_BUDGET: f64 = 1e-3;

/// Simulate `n_paths` paths of `spec` on `[0, horizon]` and map each to a
/// summary. `None` marks a degenerate-tail path; more than 0.1% of those
/// fails the run.
fn par_map_paths<T, F>(
    spec: &MeasureSpec,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    f: F,
) -> Result<(Vec<T>, usize), McError>
where
    T: Send,
    F: Fn(&Path) -> Result<Option<T>, EvalError> + Sync,
{
    if n_paths < MIN_PATHS {
        return Err(McError::TooFewPaths { got: n_paths, min: MIN_PATHS });
    }
    let mapped: Result<Vec<Option<T>>, EvalError> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let path = sample_path(spec, horizon, &mut rng);
            match f(&path) {
                Ok(v) => Ok(v),
                Err(EvalError::DegenerateTail { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mapped = mapped?;
    let excluded = mapped.iter().filter(|v| v.is_none()).count();
    if excluded as f64 > EXCLUSION_BUDGET * n_paths as f64 {
        return Err(McError::TooManyExclusions { excluded, n_paths });
    }
    Ok((mapped.into_iter().flatten().collect(), excluded))
}

/// Importance-sampling estimate of `E_Q[phi]`: average of
/// `phi(path, t) · e^{log M_t}` over paths simulated under the source.
pub fn is_expectation<F>(
    phi: F,
    source: &MeasureSpec,
    density: &ChangeOfMeasure,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EstimatorResult, McError>
where
    F: Fn(&Path, f64) -> f64 + Sync,
{
    let horizon = if t > 0.0 { t } else { 1.0 };
    let (values, _) = par_map_paths(source, horizon, n_paths, seed, |path| {
        let log_m = density.log_density(path, t, source)?;
        Ok(Some(phi(path, t) * log_m.exp()))
    })?;
    let (estimate, std_error) = mean_and_se(&values);
    Ok(EstimatorResult { estimate, std_error, n_paths: values.len(), seed })
}

/// Plain Monte Carlo under `spec`; the oracle side of round-trip tests.
pub fn direct_expectation<F>(
    phi: F,
    spec: &MeasureSpec,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EstimatorResult, McError>
where
    F: Fn(&Path, f64) -> f64 + Sync,
{
    let horizon = if t > 0.0 { t } else { 1.0 };
    let (values, _) = par_map_paths(spec, horizon, n_paths, seed, |path| Ok(Some(phi(path, t))))?;
    let (estimate, std_error) = mean_and_se(&values);
    Ok(EstimatorResult { estimate, std_error, n_paths: values.len(), seed })
}

/// One event of the pre-registered family checked by a martingale test.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCheck {
    pub label: String,
    /// Paths on which the event indicator is one.
    pub n_in_event: usize,
    /// Paired estimate of `Ê[1_A · M_t] - Ê[1_A · M_s]`.
    pub mean_diff: f64,
    pub std_error: f64,
    pub z: f64,
    /// Events with fewer than 100 paths are flagged and not scored.
    pub skipped: bool,
}

/// Result of an empirical martingale test over the event family
/// `{N_s = 0}, {N_s = 1}, {N_s ≥ 2}` and `{S_s ≤ q}` at the empirical
/// quartiles of `S_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub s: f64,
    pub t: f64,
    pub events: Vec<EventCheck>,
    pub n_paths: usize,
    pub n_excluded: usize,
    pub seed: u64,
    /// All scored events satisfy `|z| ≤ 3`.
    pub pass: bool,
}

/// Per-path inputs to the event-family scoring: the conditioning statistics
/// at `s` and the paired values whose expectations must agree.
struct PathStat {
    count_s: usize,
    agg_s: f64,
    value_s: f64,
    value_t: f64,
}

fn score_events(
    stats: &[PathStat],
    s: f64,
    t: f64,
    n_paths: usize,
    n_excluded: usize,
    seed: u64,
) -> MartingaleReport {
    let mut agg: Vec<f64> = stats.iter().map(|p| p.agg_s).collect();
    agg.sort_by(|a, b| a.total_cmp(b));
    let quartile = |p: f64| -> f64 {
        let idx = ((agg.len() - 1) as f64 * p).round() as usize;
        agg[idx]
    };
    let q = [quartile(0.25), quartile(0.5), quartile(0.75)];

    let events: Vec<(String, Box<dyn Fn(&PathStat) -> bool>)> = vec![
        ("N_s = 0".into(), Box::new(|p: &PathStat| p.count_s == 0)),
        ("N_s = 1".into(), Box::new(|p: &PathStat| p.count_s == 1)),
        ("N_s >= 2".into(), Box::new(|p: &PathStat| p.count_s >= 2)),
        (format!("S_s <= q25 ({:.6})", q[0]), Box::new(move |p: &PathStat| p.agg_s <= q[0])),
        (format!("S_s <= q50 ({:.6})", q[1]), Box::new(move |p: &PathStat| p.agg_s <= q[1])),
        (format!("S_s <= q75 ({:.6})", q[2]), Box::new(move |p: &PathStat| p.agg_s <= q[2])),
    ];

    let mut checks = Vec::with_capacity(events.len());
    for (label, indicator) in events {
        let n_in_event = stats.iter().filter(|p| indicator(p)).count();
        // Paired difference over all common paths: 1_A (M_t - M_s).
        let diffs: Vec<f64> = stats
            .iter()
            .map(|p| if indicator(p) { p.value_t - p.value_s } else { 0.0 })
            .collect();
        let (mean_diff, std_error) = mean_and_se(&diffs);
        let z = if std_error > 0.0 { mean_diff / std_error } else { 0.0 };
        checks.push(EventCheck { label, n_in_event, mean_diff, std_error, z, skipped: n_in_event < 100 });
    }
    let pass = checks.iter().filter(|c| !c.skipped).all(|c| c.z.abs() <= 3.0);
    MartingaleReport { s, t, events: checks, n_paths, n_excluded, seed, pass }
}

/// Empirical surrogate of the martingale property of a likelihood-ratio
/// density: `E[1_A M_s] = E[1_A M_t]` for the pre-registered events at `s`.
pub fn martingale_check(
    source: &MeasureSpec,
    density: &ChangeOfMeasure,
    s: f64,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport, McError> {
    assert!(0.0 <= s && s < t, "need 0 <= s < t, got ({s}, {t})");
    let (stats, n_excluded) = par_map_paths(source, t, n_paths, seed, |path| {
        let m_s = density.log_density(path, s, source)?.exp();
        let m_t = density.log_density(path, t, source)?.exp();
        Ok(Some(PathStat {
            count_s: path.count_at(s).expect("s <= horizon"),
            agg_s: path.aggregate_at(s).expect("s <= horizon"),
            value_s: m_s,
            value_t: m_t,
        }))
    })?;
    Ok(score_events(&stats, s, t, n_paths, n_excluded, seed))
}

/// Same event-family test applied to the surplus `Z_u = S_u - u·p(spec)`
/// under direct simulation: passes exactly when the spec's interarrival law
/// makes the aggregate a compound Poisson process.
pub fn surplus_martingale_check(
    spec: &MeasureSpec,
    s: f64,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport, McError> {
    assert!(0.0 <= s && s <= t, "need 0 <= s <= t, got ({s}, {t})");
    let rate = spec.premium_density();
    let (stats, n_excluded) = par_map_paths(spec, t.max(f64::MIN_POSITIVE), n_paths, seed, |path| {
        Ok(Some(PathStat {
            count_s: path.count_at(s).expect("s <= horizon"),
            agg_s: path.aggregate_at(s).expect("s <= horizon"),
            value_s: path.surplus_at(s, rate).expect("s <= horizon"),
            value_t: path.surplus_at(t, rate).expect("t <= horizon"),
        }))
    })?;
    Ok(score_events(&stats, s, t, n_paths, n_excluded, seed))
}

/// Weighted Kolmogorov–Smirnov comparison of a sample against a target CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size `(Σw)² / Σw²` of the self-normalised weights.
    pub n_eff: f64,
    /// Set when `n_eff < 100`; the asymptotic p-value is then untrustworthy.
    pub unreliable: bool,
}

/// Compare the weighted empirical CDF of `samples` (value, weight) with
/// `target_cdf`. Weights are self-normalised; the p-value uses the
/// Kolmogorov asymptotic at the effective sample size.
pub fn weighted_ks<F>(samples: &[(f64, f64)], target_cdf: F) -> Result<KsReport, McError>
where
    F: Fn(f64) -> f64,
{
    if samples.len() < 1_000 {
        return Err(McError::InsufficientSamples { got: samples.len(), min: 1_000 });
    }
    if let Some(&(_, w)) = samples.iter().find(|(_, w)| !(*w > 0.0) || !w.is_finite()) {
        return Err(McError::NonPositiveWeight(w));
    }
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let total: f64 = pairwise_sum(&sorted.iter().map(|(_, w)| *w).collect::<Vec<_>>());
    let sum_sq: f64 = pairwise_sum(&sorted.iter().map(|(_, w)| w * w).collect::<Vec<_>>());
    let n_eff = total * total / sum_sq;

    let mut cum = 0.0;
    let mut statistic = 0.0_f64;
    for &(x, w) in &sorted {
        let f = target_cdf(x);
        let below = cum / total;
        cum += w;
        let above = cum / total;
        statistic = statistic.max((below - f).abs()).max((above - f).abs());
    }

    // Stephens' small-sample adjustment of the Kolmogorov asymptotic.
    let root = n_eff.sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * statistic;
    let p_value = ks_survival(lambda);
    Ok(KsReport { statistic, p_value, n_eff, unreliable: n_eff < 100.0 })
}

/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`, clamped to `[0, 1]`.
fn ks_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=101 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Expected claims per unit time, `E[X_1]/E[W_1]`.
pub fn premium_density(spec: &MeasureSpec) -> f64 {
    spec.premium_density()
}

/// Standard path functionals for the estimators.
pub mod functionals {
    use crate::process::Path;

    pub fn unit(_: &Path, _: f64) -> f64 {
        1.0
    }

    /// `N_t`
    pub fn count(path: &Path, t: f64) -> f64 {
        path.count_at(t).expect("t <= horizon") as f64
    }

    /// `S_t`
    pub fn aggregate(path: &Path, t: f64) -> f64 {
        path.aggregate_at(t).expect("t <= horizon")
    }

    /// `X_1` (every path retains at least one arrival)
    pub fn first_claim(path: &Path, _: f64) -> f64 {
        path.claims()[0]
    }
}
