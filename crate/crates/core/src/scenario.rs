//! Built-in example scenarios and the check-suite runner.
//!
//! A [`Scenario`] bundles a source measure, a claim-tilt recipe, a target
//! change (either a full interarrival law or the scalar `α` selecting a
//! Poisson rate) and the simulation budget. [`run_scenario`] resolves it,
//! certifies the tilt, and runs the full check suite, emitting one
//! [`CheckRow`] per statistic in a fixed order so output is byte-stable.

use thiserror::Error;

use crate::distributions::{DistError, ParamDistribution};
use crate::montecarlo::{
    self, functionals, is_expectation, martingale_check, weighted_ks, ChangeOfMeasure, McError,
};
use crate::process::{MeasureSpec, ProcessError};
use crate::renewal::poisson_linearity_report;
use crate::tilt::{
    build_target_measure, convert_to_cpp, esscher_tilt, tilt_from_density_ratio,
    tilted_claim_law, validate_tilt, BetaTilt, ClaimTilt, TiltError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Mc(#[from] McError),
}

/// Recipe for the claim tilt.
#[derive(Debug, Clone)]
pub enum TiltSpec {
    /// `γ = ln(target claim density / source claim density)`.
    DensityRatio { target_claim: ParamDistribution },
    /// Exponential tilt with parameter `c`.
    Esscher { c: f64 },
    /// Piecewise-linear `γ` through `(x, γ(x))` knots, constant outside.
    Table { xs: Vec<f64>, gammas: Vec<f64> },
}

/// How the interarrival law changes under the target measure.
#[derive(Debug, Clone)]
pub enum TargetChange {
    /// General renewal target with this interarrival law.
    Interarrival(ParamDistribution),
    /// Compound Poisson target selected by the additive constant `α`
    /// (`ρ = e^α / E[W_1]`).
    Alpha(f64),
    /// Compound Poisson target with rate `ρ` (`α = ln ρ + ln E[W_1]`).
    PoissonRate(f64),
}

/// A fully specified, reproducible experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source: MeasureSpec,
    pub tilt: TiltSpec,
    pub change: TargetChange,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
    /// `(s, t)` pair for the martingale check.
    pub martingale_pair: (f64, f64),
    pub n_paths: usize,
    pub seed: u64,
    /// Expected target claim marginal for the goodness-of-fit check.
    pub ks_target: Option<ParamDistribution>,
    /// Whether the premium comparison must show positive safety loading.
    pub requires_loading: bool,
}

/// A scenario with tilt and measures resolved and certified.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub tilt: ClaimTilt,
    /// Interarrival law under the target measure.
    pub target_interarrival: ParamDistribution,
    /// The full target measure, when the tilted claim law has a closed
    /// form (a table tilt has none and is handled by importance sampling).
    pub target: Option<MeasureSpec>,
    pub density: ChangeOfMeasure,
    /// Present when the target is compound Poisson.
    pub beta: Option<BetaTilt>,
    /// A compound Poisson version of the target, for surplus-martingale
    /// checks: the target itself when already Poisson, otherwise the
    /// identity-tilt conversion of the target measure.
    pub converted_cpp: Option<MeasureSpec>,
}

impl ResolvedScenario {
    /// Premium density of the target measure, `E_Q[X_1]/E_Q[W_1]`: closed
    /// form when the tilted law is known, tilted-moment quadrature
    /// otherwise.
    pub fn target_premium_density(&self, source: &MeasureSpec) -> Result<f64, ScenarioError> {
        match &self.target {
            Some(t) => Ok(t.premium_density()),
            None => Ok(crate::tilt::tilted_moment(&self.tilt, &source.claim, 1)?
                / self.target_interarrival.mean()),
        }
    }
}

impl Scenario {
    /// Resolve the tilt and target measures. Fails when the configuration
    /// cannot produce a validated tilt before any simulation starts.
    pub fn resolve(&self) -> Result<ResolvedScenario, ScenarioError> {
        if !(self.horizon > 0.0) {
            return Err(ScenarioError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_paths < 1_000 {
            return Err(ScenarioError::InvalidConfig(format!(
                "n_paths must be at least 1000, got {}",
                self.n_paths
            )));
        }
        if self.t_grid.is_empty()
            || self.t_grid.iter().any(|&t| !(t > 0.0) || t > self.horizon)
        {
            return Err(ScenarioError::InvalidConfig(
                "t grid must be nonempty with every t in (0, horizon]".into(),
            ));
        }
        let (s, t) = self.martingale_pair;
        if !(0.0 <= s && s < t && t <= self.horizon) {
            return Err(ScenarioError::InvalidConfig(format!(
                "martingale pair must satisfy 0 <= s < t <= horizon, got ({s}, {t})"
            )));
        }

        let tilt = match &self.tilt {
            TiltSpec::DensityRatio { target_claim } => {
                tilt_from_density_ratio(&self.source.claim, target_claim)
            }
            TiltSpec::Esscher { c } => esscher_tilt(*c, &self.source.claim)?,
            TiltSpec::Table { xs, gammas } => {
                if xs.len() != gammas.len() || xs.len() < 2 {
                    return Err(ScenarioError::InvalidConfig(
                        "tilt table needs at least two (x, gamma) knots".into(),
                    ));
                }
                if xs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(ScenarioError::InvalidConfig(
                        "tilt table x knots must be strictly increasing".into(),
                    ));
                }
                let xs = xs.clone();
                let gammas = gammas.clone();
                ClaimTilt::custom(move |x: f64| {
                    if x <= xs[0] {
                        return gammas[0];
                    }
                    if x >= *xs.last().unwrap() {
                        return *gammas.last().unwrap();
                    }
                    let i = xs.partition_point(|&k| k <= x) - 1;
                    let frac = (x - xs[i]) / (xs[i + 1] - xs[i]);
                    gammas[i] + frac * (gammas[i + 1] - gammas[i])
                })
            }
        };

        let mean_w = self.source.interarrival.mean();
        let has_closed_law = tilted_claim_law(&self.source.claim, &tilt).is_ok();
        let (target_interarrival, target, density, beta) = match &self.change {
            TargetChange::Interarrival(law) => {
                let target = if has_closed_law {
                    Some(build_target_measure(&self.source, &tilt, *law)?)
                } else {
                    None
                };
                let density =
                    ChangeOfMeasure::Rrm { target_interarrival: *law, tilt: tilt.clone() };
                (*law, target, density, None)
            }
            TargetChange::Alpha(alpha) => {
                let beta = BetaTilt::from_alpha(tilt.clone(), *alpha, mean_w);
                self.cpp_parts(beta, has_closed_law)?
            }
            TargetChange::PoissonRate(rate) => {
                if !(*rate > 0.0) {
                    return Err(ScenarioError::InvalidConfig(format!(
                        "target Poisson rate must be positive, got {rate}"
                    )));
                }
                let beta = BetaTilt::from_rate(tilt.clone(), *rate, mean_w);
                self.cpp_parts(beta, has_closed_law)?
            }
        };

        let converted_cpp = match &target {
            None => None,
            Some(t) => Some(match t.interarrival {
                ParamDistribution::Exponential { .. } => t.clone(),
                _ => MeasureSpec::new(
                    ParamDistribution::exponential(1.0 / t.interarrival.mean())?,
                    t.claim,
                    format!("{} (cpp)", t.label),
                )?,
            }),
        };

        Ok(ResolvedScenario { tilt, target_interarrival, target, density, beta, converted_cpp })
    }

    fn cpp_parts(
        &self,
        beta: BetaTilt,
        has_closed_law: bool,
    ) -> Result<(ParamDistribution, Option<MeasureSpec>, ChangeOfMeasure, Option<BetaTilt>), ScenarioError>
    {
        let interarrival = ParamDistribution::exponential(beta.implied_rate())?;
        let target =
            if has_closed_law { Some(convert_to_cpp(&self.source, &beta)?) } else { None };
        Ok((interarrival, target, ChangeOfMeasure::Rpm { beta: beta.clone() }, Some(beta)))
    }
}

/// One line of the per-run report CSV:
/// `scenario, check, statistic, value, std_error, z, pass, seed, n_paths`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub scenario: String,
    pub check: String,
    pub statistic: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub pass: bool,
    pub seed: u64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<CheckRow>,
    pub pass: bool,
}

/// Command-line overrides for a scenario run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    /// Unit-mass tolerance for tilt validation (default 1e-6).
    pub tol: Option<f64>,
}

/// Number of weighted claim draws for the goodness-of-fit check.
const KS_SAMPLES: usize = 10_000;

/// Seed replications for the stochastic checks and the quorum needed to
/// pass: five seeds, at least four in band. Importance weights of a
/// measure change can be heavy-tailed, so a single 3·SE band has a
/// nontrivial false-alarm rate; the quorum keeps it below 1e-3 without
/// widening any band.
const SEED_REPS: u64 = 5;
const SEED_QUORUM: usize = 4;

/// Execute the scenario's check suite:
/// tilt validation → unit mass → martingale → weighted KS → premium
/// comparison → renewal linearity.
///
/// Stochastic checks are replicated over [`SEED_REPS`] consecutive seeds
/// starting at the scenario seed; the reported value comes from the base
/// seed and `pass` is the quorum verdict.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    let mut sc = scenario.clone();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    if let Some(n) = opts.n_paths {
        sc.n_paths = n;
    }
    if let Some(h) = opts.horizon {
        sc.horizon = h;
        sc.t_grid.retain(|&t| t <= h);
        if sc.t_grid.is_empty() {
            sc.t_grid.push(h);
        }
        if sc.martingale_pair.1 > h {
            sc.martingale_pair = (0.25 * h, h);
        }
    }
    let tol = opts.tol.unwrap_or(1e-6);
    let resolved = sc.resolve()?;

    let mut rows: Vec<CheckRow> = Vec::new();
    let mut row = |check: &str, statistic: String, value: f64, se: Option<f64>, z: Option<f64>, pass: bool| {
        rows.push(CheckRow {
            scenario: sc.name.clone(),
            check: check.to_string(),
            statistic,
            value,
            std_error: se,
            z,
            pass,
            seed: sc.seed,
            n_paths: sc.n_paths,
        });
    };

    // 1. Tilt certification by quadrature.
    let report = validate_tilt(&resolved.tilt, &sc.source.claim, 2, tol)?;
    row("validate_tilt", "unit_mass".into(), report.unit_mass, None, None, report.pass);
    for (j, m) in report.moments.iter().enumerate() {
        row("validate_tilt", format!("moment_{}", j + 1), *m, None, None, m.is_finite());
    }

    // 2. Unit mass of the density at each grid time.
    for &t in &sc.t_grid {
        let mut passes = 0;
        let mut base: Option<(f64, f64, f64)> = None;
        for i in 0..SEED_REPS {
            let est = is_expectation(
                functionals::unit,
                &sc.source,
                &resolved.density,
                t,
                sc.n_paths,
                sc.seed.wrapping_add(i),
            )?;
            let z = if est.std_error > 0.0 { (est.estimate - 1.0) / est.std_error } else { 0.0 };
            if z.abs() <= 3.0 {
                passes += 1;
            }
            if i == 0 {
                base = Some((est.estimate, est.std_error, z));
            }
        }
        let (estimate, se, z) = base.expect("at least one seed rep");
        row("unit_mass", format!("t={t}"), estimate, Some(se), Some(z), passes >= SEED_QUORUM);
    }

    // 3. Martingale property over the pre-registered event family. The
    // event family is positional, so seed replications are compared by
    // event index (quartile thresholds differ slightly per seed).
    let (s, t) = sc.martingale_pair;
    let reports: Vec<_> = (0..SEED_REPS)
        .map(|i| {
            martingale_check(&sc.source, &resolved.density, s, t, sc.n_paths, sc.seed.wrapping_add(i))
        })
        .collect::<Result<_, _>>()?;
    let base = &reports[0];
    let mut all_events_pass = true;
    for (idx, e) in base.events.iter().enumerate() {
        let passes = reports
            .iter()
            .filter(|r| {
                let ev = &r.events[idx];
                ev.skipped || ev.z.abs() <= 3.0
            })
            .count();
        if e.skipped {
            row("martingale", format!("{} [skipped]", e.label), e.n_in_event as f64, None, None, true);
        } else {
            let event_pass = passes >= SEED_QUORUM;
            all_events_pass &= event_pass;
            row("martingale", e.label.clone(), e.mean_diff, Some(e.std_error), Some(e.z), event_pass);
        }
    }
    row(
        "martingale",
        format!("all events (s={s}, t={t})"),
        base.events.len() as f64,
        None,
        None,
        all_events_pass,
    );

    // 4. Weighted KS of the tilted claim marginal.
    if let Some(target_claim) = &sc.ks_target {
        let mut passes = 0;
        let mut base: Option<montecarlo::KsReport> = None;
        for i in 0..SEED_REPS {
            let mut rng = montecarlo::path_rng(sc.seed.wrapping_add(i), u64::MAX);
            let samples: Vec<(f64, f64)> = (0..KS_SAMPLES)
                .map(|_| {
                    let x = sc.source.claim.sample(&mut rng);
                    (x, resolved.tilt.weight(x))
                })
                .collect();
            let ks = weighted_ks(&samples, |x| target_claim.cdf(x).unwrap_or(0.0))?;
            if ks.p_value > 0.01 {
                passes += 1;
            }
            if i == 0 {
                base = Some(ks);
            }
        }
        let ks = base.expect("at least one seed rep");
        row(
            "weighted_ks",
            format!("p_value vs {}", target_claim.describe()),
            ks.p_value,
            None,
            None,
            passes >= SEED_QUORUM,
        );
        row("weighted_ks", "n_eff".into(), ks.n_eff, None, None, !ks.unreliable);
    }

    // 5. Premium densities and safety loading.
    let p_source = sc.source.premium_density();
    let p_target = resolved.target_premium_density(&sc.source)?;
    row("premium", "p_source".into(), p_source, None, None, true);
    row("premium", "p_target".into(), p_target, None, None, true);
    let loading_ok = !sc.requires_loading || p_target > p_source;
    row("premium", "loading".into(), p_target - p_source, None, None, loading_ok);

    // 6. Renewal linearity: exponential interarrivals and only they are
    // linear in t.
    let grid: Vec<f64> = sc.t_grid.clone();
    let src_linear = poisson_linearity_report(&sc.source.interarrival, &grid, 1e-12);
    let src_is_exp = matches!(
        sc.source.interarrival,
        ParamDistribution::Exponential { .. } | ParamDistribution::Weibull { shape: 1.0, .. }
    );
    row(
        "renewal",
        "source max_rel_dev".into(),
        src_linear.max_rel_dev,
        None,
        None,
        src_linear.is_linear == src_is_exp,
    );
    let cpp_rate = match resolved.target_interarrival {
        ParamDistribution::Exponential { rate } => rate,
        ref law => 1.0 / law.mean(),
    };
    let tgt_linear =
        poisson_linearity_report(&ParamDistribution::exponential(cpp_rate)?, &grid, 1e-12);
    row("renewal", "converted max_rel_dev".into(), tgt_linear.max_rel_dev, None, None, tgt_linear.is_linear);

    let pass = rows.iter().all(|r| r.pass);
    Ok(RunReport { rows, pass })
}

fn exp(rate: f64) -> ParamDistribution {
    ParamDistribution::exponential(rate).expect("valid rate")
}
fn ga(rate: f64, shape: f64) -> ParamDistribution {
    ParamDistribution::gamma(rate, shape).expect("valid parameters")
}
fn wei(shape: f64, scale: f64) -> ParamDistribution {
    ParamDistribution::weibull(shape, scale).expect("valid parameters")
}
fn measure(inter: ParamDistribution, claim: ParamDistribution, label: &str) -> MeasureSpec {
    MeasureSpec::new(inter, claim, label).expect("valid measure")
}

/// The six built-in example scenarios.
///
/// * `example-2.1` — Poisson source `Exp(1)`, Poisson target `Exp(2)`,
///   claims retilted `Exp(1) → Exp(2)`; the density has the closed
///   geometric-exponential form.
/// * `example-2.2` — gamma interarrivals `Ga(1,2) → Ga(1.5,3)` with the
///   same claim tilt; exercises the Erlang survival-ratio factor.
/// * `example-3.1` — gamma source converted to a compound Poisson target
///   with rate 1; claims `Ga(3,2) → Exp(1)` by density ratio.
/// * `example-4.1` — premium principle with `γ` containing a `-ln x` term:
///   claims `Ga(4,2) → Exp(4/2.05)`, target rate `ρ = 2/1.99`.
/// * `example-4.2` — Weibull interarrivals, Esscher claim tilt `c = 0.5` on
///   `Exp(2)` claims, `α = 0`.
/// * `example-4.3` — Esscher premium principle on `Ga(3,2)` claims with
///   `c = 1`; the tilted mean rises from 2/3 to 1.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "example-2.1".into(),
            source: measure(exp(1.0), exp(1.0), "P"),
            tilt: TiltSpec::DensityRatio { target_claim: exp(2.0) },
            change: TargetChange::Interarrival(exp(1.5)),
            horizon: 10.0,
            t_grid: vec![1.0, 2.0, 4.0],
            martingale_pair: (1.0, 3.0),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(exp(2.0)),
            requires_loading: false,
        },
        Scenario {
            name: "example-2.2".into(),
            source: measure(ga(1.0, 2.0), exp(1.0), "P"),
            tilt: TiltSpec::DensityRatio { target_claim: exp(2.0) },
            change: TargetChange::Interarrival(ga(1.5, 3.0)),
            horizon: 10.0,
            t_grid: vec![2.0, 5.0, 10.0],
            martingale_pair: (2.0, 5.0),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(exp(2.0)),
            requires_loading: false,
        },
        Scenario {
            name: "example-3.1".into(),
            source: measure(ga(2.0, 2.0), ga(3.0, 2.0), "P"),
            tilt: TiltSpec::DensityRatio { target_claim: exp(1.0) },
            change: TargetChange::PoissonRate(1.0),
            horizon: 10.0,
            // The shape-2 → shape-1 ratios have borderline-heavy weight
            // tails, so the 3·SE checks run at short times.
            t_grid: vec![0.5, 1.0, 2.0],
            martingale_pair: (0.5, 1.5),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(exp(1.0)),
            requires_loading: false,
        },
        Scenario {
            name: "example-4.1".into(),
            source: measure(ga(2.0, 2.0), ga(4.0, 2.0), "P"),
            // γ(x) = ln(E[X]/(2c)) - ln x + 2(c-1)/(c E[X]) x with c = 2.05
            // equals the density ratio Ga(4,2) → Exp(ζ/c); c stays near 2
            // because the weight tail index is c/(c-1), and a large claim
            // rate ζ shrinks the tail coefficient on both ends.
            tilt: TiltSpec::DensityRatio { target_claim: exp(4.0 / 2.05) },
            // α = ln((ξ/d) E[W]) with ξ = 2, d = 1.99: the converted rate
            // must exceed the source renewal rate (d < k), but only just,
            // or paths with many arrivals become rare under the sampling
            // measure while carrying most of the target mass.
            change: TargetChange::PoissonRate(2.0 / 1.99),
            horizon: 10.0,
            t_grid: vec![0.5, 1.0, 2.0],
            martingale_pair: (0.5, 1.5),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(exp(4.0 / 2.05)),
            requires_loading: true,
        },
        Scenario {
            name: "example-4.2".into(),
            source: measure(wei(1.2, 1.0), exp(2.0), "P"),
            tilt: TiltSpec::Esscher { c: 0.5 },
            change: TargetChange::Alpha(0.0),
            horizon: 10.0,
            t_grid: vec![2.0, 5.0, 10.0],
            martingale_pair: (2.0, 5.0),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(exp(1.5)),
            requires_loading: true,
        },
        Scenario {
            name: "example-4.3".into(),
            source: measure(ga(2.0, 2.0), ga(3.0, 2.0), "P"),
            tilt: TiltSpec::Esscher { c: 1.0 },
            change: TargetChange::Alpha(0.0),
            horizon: 10.0,
            t_grid: vec![0.5, 1.0, 2.0],
            martingale_pair: (0.5, 1.5),
            n_paths: 100_000,
            seed: 42,
            ks_target: Some(ga(2.0, 2.0)),
            requires_loading: true,
        },
    ]
}

/// Look up a built-in scenario by name.
pub fn find_builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
