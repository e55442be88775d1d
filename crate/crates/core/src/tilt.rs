//! Measure-change machinery for compound renewal processes.
//!
//! A [`ClaimTilt`] reweights the claim-size law: it evaluates a function
//! `γ` with unit mean weight `E[e^{γ(X_1)}] = 1` under the source claim law
//! (the link is fixed to `h = ln`, so the weight is `w = e^γ`). A
//! [`BetaTilt`] adds the scalar `α` that selects the target Poisson rate
//! through the constraint `α = ln ρ + ln E[W_1]`.
//!
//! Two likelihood-ratio evaluators share these pieces:
//!
//! * [`rrm_log_density`] — density of a general renewal target measure with
//!   respect to the source on the σ-algebra generated by the process up to
//!   `t`;
//! * [`rpm_log_density`] — the same density when the target is compound
//!   Poisson, written directly in terms of `β = γ + α`.
//!
//! Everything is combined in log space: with dozens of arrival factors the
//! linear-space product would overflow or underflow.

use std::sync::Arc;

use thiserror::Error;

use crate::distributions::{DistError, ParamDistribution};
use crate::process::{MeasureSpec, Path, ProcessError};
use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TiltError {
    #[error("no closed form for the tilted law: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge while evaluating {0}")]
    NonConvergent(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Process(#[from] ProcessError),
}

/// Path-level evaluation failure of a likelihood-ratio density.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    /// A survival factor fell below 1e-300: the path ran into a tail the
    /// working measure gives essentially zero mass.
    #[error("degenerate tail: survival factor {survival} below 1e-300")]
    DegenerateTail { survival: f64 },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

const SURVIVAL_FLOOR: f64 = 1e-300;

/// How a claim tilt is represented.
#[derive(Clone)]
pub enum TiltDescriptor {
    /// `γ = ln(target density / source density)`; unit mass is automatic.
    DensityRatio { source: ParamDistribution, target: ParamDistribution },
    /// `γ(x) = c·x - ln E[e^{cX}]`; `log_mgf` caches the normaliser.
    Esscher { c: f64, log_mgf: f64 },
    /// Arbitrary user-supplied `γ`; membership must be certified by
    /// [`validate_tilt`].
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TiltDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DensityRatio { source, target } => f
                .debug_struct("DensityRatio")
                .field("source", source)
                .field("target", target)
                .finish(),
            Self::Esscher { c, log_mgf } => {
                f.debug_struct("Esscher").field("c", c).field("log_mgf", log_mgf).finish()
            }
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A claim-size reweighting with `E[e^{γ(X_1)}] = 1` under its source law.
#[derive(Debug, Clone)]
pub struct ClaimTilt {
    descriptor: TiltDescriptor,
}

impl ClaimTilt {
    /// The trivial tilt `γ ≡ 0`, `w ≡ 1`.
    pub fn identity() -> Self {
        Self { descriptor: TiltDescriptor::Esscher { c: 0.0, log_mgf: 0.0 } }
    }

    pub fn custom(gamma: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { descriptor: TiltDescriptor::Custom(Arc::new(gamma)) }
    }

    pub fn descriptor(&self) -> &TiltDescriptor {
        &self.descriptor
    }

    /// `γ(x)` for `x > 0`.
    pub fn gamma(&self, x: f64) -> f64 {
        assert!(x > 0.0, "claim tilt evaluated at nonpositive x = {x}");
        match &self.descriptor {
            TiltDescriptor::DensityRatio { source, target } => {
                // Both laws have positive densities on (0, ∞), so the ratio
                // is finite and positive.
                target.ln_density(x).expect("x > 0") - source.ln_density(x).expect("x > 0")
            }
            TiltDescriptor::Esscher { c, log_mgf } => c * x - log_mgf,
            TiltDescriptor::Custom(g) => g(x),
        }
    }

    /// The weight `w(x) = e^{γ(x)}`.
    pub fn weight(&self, x: f64) -> f64 {
        self.gamma(x).exp()
    }
}

/// Build the tilt `γ = ln(target/source)` between two claim laws. Mutual
/// absolute continuity is automatic for the supported families on `(0, ∞)`.
pub fn tilt_from_density_ratio(
    source_claim: &ParamDistribution,
    target_claim: &ParamDistribution,
) -> ClaimTilt {
    ClaimTilt {
        descriptor: TiltDescriptor::DensityRatio { source: *source_claim, target: *target_claim },
    }
}

/// Exponential tilt `w(x) = e^{cx} / E[e^{cX}]`, normalised by construction.
pub fn esscher_tilt(c: f64, source_claim: &ParamDistribution) -> Result<ClaimTilt, TiltError> {
    let mgf = source_claim.mgf(c)?;
    Ok(ClaimTilt { descriptor: TiltDescriptor::Esscher { c, log_mgf: mgf.ln() } })
}

/// Certification of tilt membership: unit mass and finite tilted moments.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltReport {
    /// Quadrature value of `E[w(X_1)]` under the source claim law.
    pub unit_mass: f64,
    /// Tilted raw moments `E[X^j w(X)]` for `j = 1..=moment_order`.
    pub moments: Vec<f64>,
    /// Whether every quadrature converged to its tolerance.
    pub converged: bool,
    /// `converged`, unit mass within `tol` of one, all moments finite.
    pub pass: bool,
}

/// Numerically certify that `tilt` belongs to the admissible class for
/// `source_claim`: adaptive quadrature of `w · density` over the support,
/// plus the tilted moments up to `moment_order ∈ {0, 1, 2}`.
pub fn validate_tilt(
    tilt: &ClaimTilt,
    source_claim: &ParamDistribution,
    moment_order: u8,
    tol: f64,
) -> Result<TiltReport, TiltError> {
    assert!(tol > 0.0, "tolerance must be positive");
    assert!(moment_order <= 2, "moment order must be 0, 1 or 2");

    let mut converged = true;
    let mut run = |power: i32| -> f64 {
        let integrand = |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            let ln_val = tilt.gamma(x)
                + source_claim.ln_density(x).expect("x > 0")
                + power as f64 * x.ln();
            ln_val.exp()
        };
        match integrate_upper_tail(&integrand, source_claim) {
            Some(v) => v,
            None => {
                converged = false;
                f64::NAN
            }
        }
    };

    let unit_mass = run(0);
    let moments: Vec<f64> = (1..=moment_order as i32).map(run).collect();

    let pass = converged
        && (unit_mass - 1.0).abs() <= tol
        && moments.iter().all(|m| m.is_finite());
    Ok(TiltReport { unit_mass, moments, converged, pass })
}

/// Integrate over `(0, upper)` with `upper` at the 1 - 1e-12 source
/// quantile, then extend by doubling panels: a tilt may move mass far past
/// the source tail (e.g. an Esscher `c` close to the rate).
fn integrate_upper_tail(
    integrand: &impl Fn(f64) -> f64,
    source_claim: &ParamDistribution,
) -> Option<f64> {
    let mut upper = source_claim.quantile(1.0 - 1e-12).ok()?;
    let mut total = quad::integrate(integrand, 0.0, upper, 1e-10).ok()?;
    for _ in 0..64 {
        let next = upper * 2.0;
        let panel = quad::integrate(integrand, upper, next, 1e-12).ok()?;
        total += panel;
        upper = next;
        if panel.abs() <= 1e-13 * total.abs().max(1.0) {
            return Some(total);
        }
    }
    None
}

/// Tilted raw moment `E_P[X^power · w(X)]` by quadrature, for tilts with no
/// closed-form law.
pub fn tilted_moment(
    tilt: &ClaimTilt,
    source_claim: &ParamDistribution,
    power: u8,
) -> Result<f64, TiltError> {
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        (tilt.gamma(x) + source_claim.ln_density(x).expect("x > 0") + power as f64 * x.ln()).exp()
    };
    integrate_upper_tail(&integrand, source_claim)
        .ok_or_else(|| TiltError::NonConvergent(format!("tilted moment of order {power}")))
}

/// The claim law under the target measure, `dQ_{X_1} = w · dP_{X_1}`,
/// where a closed form exists.
pub fn tilted_claim_law(
    source_claim: &ParamDistribution,
    tilt: &ClaimTilt,
) -> Result<ParamDistribution, TiltError> {
    match &tilt.descriptor {
        TiltDescriptor::DensityRatio { target, .. } => Ok(*target),
        TiltDescriptor::Esscher { c, .. } => {
            if *c == 0.0 {
                return Ok(*source_claim);
            }
            match *source_claim {
                ParamDistribution::Exponential { rate } => {
                    Ok(ParamDistribution::exponential(rate - c)?)
                }
                ParamDistribution::Gamma { rate, shape } => {
                    Ok(ParamDistribution::gamma(rate - c, shape)?)
                }
                ParamDistribution::Weibull { shape, scale } if shape == 1.0 => {
                    Ok(ParamDistribution::exponential(1.0 / scale - c)?)
                }
                ParamDistribution::Weibull { .. } => Err(TiltError::Unsupported(
                    "Esscher tilt of a Weibull law leaves the family; use importance sampling".into(),
                )),
            }
        }
        TiltDescriptor::Custom(_) => Err(TiltError::Unsupported(
            "custom tilt has no closed-form tilted law; use importance sampling".into(),
        )),
    }
}

/// A claim tilt extended by the scalar `α` tying it to a target Poisson
/// rate `ρ = e^α / E[W_1]`.
#[derive(Debug, Clone)]
pub struct BetaTilt {
    base: ClaimTilt,
    alpha: f64,
    implied_rate: f64,
}

impl BetaTilt {
    /// From the additive constant `α`; the target rate follows from
    /// `ρ = e^α / E[W_1]`.
    pub fn from_alpha(base: ClaimTilt, alpha: f64, mean_interarrival: f64) -> Self {
        assert!(mean_interarrival > 0.0);
        Self { base, alpha, implied_rate: alpha.exp() / mean_interarrival }
    }

    /// From the target Poisson rate; `α = ln ρ + ln E[W_1]`.
    pub fn from_rate(base: ClaimTilt, rate: f64, mean_interarrival: f64) -> Self {
        assert!(rate > 0.0 && mean_interarrival > 0.0);
        Self { base, alpha: rate.ln() + mean_interarrival.ln(), implied_rate: rate }
    }

    pub fn base(&self) -> &ClaimTilt {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn implied_rate(&self) -> f64 {
        self.implied_rate
    }

    /// `β(x) = γ(x) + α`.
    pub fn beta(&self, x: f64) -> f64 {
        self.base.gamma(x) + self.alpha
    }
}

fn survival_checked(d: &ParamDistribution, u: f64) -> Result<f64, EvalError> {
    let s = d.survival(u)?;
    if s < SURVIVAL_FLOOR {
        Err(EvalError::DegenerateTail { survival: s })
    } else {
        Ok(s)
    }
}

/// Log-density at time `t` of the target renewal measure with respect to
/// the source, along `path`:
///
/// `Σ_{j≤N_t} [γ(X_j) + ln Λ'(W_j) - ln K'(W_j)] + ln(1-Λ)(t-T_{N_t}) - ln(1-K)(t-T_{N_t})`
///
/// where `K` is the source interarrival law and `Λ` the target's.
pub fn rrm_log_density(
    path: &Path,
    t: f64,
    source: &MeasureSpec,
    target: &MeasureSpec,
    tilt: &ClaimTilt,
) -> Result<f64, EvalError> {
    rrm_log_density_laws(path, t, &source.interarrival, &target.interarrival, tilt)
}

/// [`rrm_log_density`] in terms of the two interarrival laws alone; the
/// target claim law enters only through the tilt.
pub fn rrm_log_density_laws(
    path: &Path,
    t: f64,
    source_interarrival: &ParamDistribution,
    target_interarrival: &ParamDistribution,
    tilt: &ClaimTilt,
) -> Result<f64, EvalError> {
    let n = path.count_at(t)?;
    let mut acc = 0.0;
    for j in 0..n {
        let w = path.interarrivals()[j];
        let x = path.claims()[j];
        acc += tilt.gamma(x) + target_interarrival.ln_density(w)? - source_interarrival.ln_density(w)?;
    }
    let u = t - path.last_arrival_at_or_before(t)?;
    let s_target = survival_checked(target_interarrival, u)?;
    let s_source = survival_checked(source_interarrival, u)?;
    Ok(acc + s_target.ln() - s_source.ln())
}

/// Log-density of the compound-Poisson target measure written in terms of
/// `β = γ + α`:
///
/// `Σ_{j≤N_t} [β(X_j) - ln E[W_1] - ln K'(W_j)] - t·ρ - ln(1-K)(t-T_{N_t})`
pub fn rpm_log_density(
    path: &Path,
    t: f64,
    source: &MeasureSpec,
    beta: &BetaTilt,
) -> Result<f64, EvalError> {
    let n = path.count_at(t)?;
    let ln_mean_w = source.interarrival.mean().ln();
    let mut acc = 0.0;
    for j in 0..n {
        let w = path.interarrivals()[j];
        let x = path.claims()[j];
        acc += beta.beta(x) - ln_mean_w - source.interarrival.ln_density(w)?;
    }
    let u = t - path.last_arrival_at_or_before(t)?;
    let s_source = survival_checked(&source.interarrival, u)?;
    Ok(acc - t * beta.implied_rate() - s_source.ln())
}

/// The compound Poisson measure induced by `beta`: interarrivals become
/// `Exp(ρ)` with `ρ = e^α / E[W_1]`, claims follow the tilted law.
pub fn convert_to_cpp(source: &MeasureSpec, beta: &BetaTilt) -> Result<MeasureSpec, TiltError> {
    let claim = tilted_claim_law(&source.claim, beta.base())?;
    let interarrival = ParamDistribution::exponential(beta.implied_rate())?;
    Ok(MeasureSpec::new(interarrival, claim, format!("{} (cpp)", source.label))?)
}

/// The general renewal target measure: the given interarrival law plus the
/// tilted claim law.
pub fn build_target_measure(
    source: &MeasureSpec,
    tilt: &ClaimTilt,
    target_interarrival: ParamDistribution,
) -> Result<MeasureSpec, TiltError> {
    let claim = tilted_claim_law(&source.claim, tilt)?;
    Ok(MeasureSpec::new(target_interarrival, claim, format!("{} (target)", source.label))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::process::sample_path;

    fn exp(rate: f64) -> ParamDistribution {
        ParamDistribution::exponential(rate).unwrap()
    }
    fn ga(rate: f64, shape: f64) -> ParamDistribution {
        ParamDistribution::gamma(rate, shape).unwrap()
    }
    fn spec(inter: ParamDistribution, claim: ParamDistribution) -> MeasureSpec {
        MeasureSpec::new(inter, claim, "test").unwrap()
    }

    #[test]
    fn identity_tilt_is_flat() {
        let tilt = ClaimTilt::identity();
        for x in [0.1, 1.0, 7.3] {
            assert_eq!(tilt.gamma(x), 0.0);
            assert_eq!(tilt.weight(x), 1.0);
        }
    }

    #[test]
    fn density_ratio_same_law_is_identity() {
        let tilt = tilt_from_density_ratio(&ga(2.0, 2.0), &ga(2.0, 2.0));
        for x in [0.2, 1.0, 5.0] {
            assert_eq!(tilt.gamma(x), 0.0);
        }
    }

    #[test]
    fn density_ratio_gamma_to_exponential_closed_form() {
        // source Ga(b, 2), target Exp(ζ): γ(x) = ln(ζ e^{-ζx} / (b² x e^{-bx}))
        let (b, zeta) = (2.0, 1.0);
        let tilt = tilt_from_density_ratio(&ga(b, 2.0), &exp(zeta));
        for x in [0.3, 1.0, 2.5, 8.0] {
            let expected = (zeta * (-zeta * x).exp() / (b * b * x * (-b * x).exp())).ln();
            assert_abs_diff_eq!(tilt.gamma(x), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn density_ratio_exponential_shift_closed_form() {
        // source Exp(η), target Exp(η - c): γ(x) = ln(1 - c/η) + c·x
        let (eta, c) = (2.0, 1.0);
        let tilt = tilt_from_density_ratio(&exp(eta), &exp(eta - c));
        for x in [0.1, 0.9, 3.0] {
            assert_abs_diff_eq!(tilt.gamma(x), (1.0 - c / eta).ln() + c * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn esscher_gamma_family_closure() {
        // Esscher(c) of Ga(b, a) tilts to Ga(b-c, a)
        let (a, b, c) = (2.0, 3.0, 1.0);
        let source = ga(b, a);
        let tilt = esscher_tilt(c, &source).unwrap();
        let tilted = tilted_claim_law(&source, &tilt).unwrap();
        assert_eq!(tilted, ga(b - c, a));
        // tilted mean a/(b-c) exceeds a/b
        assert_abs_diff_eq!(tilted.mean(), a / (b - c), epsilon = 1e-12);
        assert!(tilted.mean() > source.mean());
        // c = 0 keeps the source
        let id = esscher_tilt(0.0, &source).unwrap();
        assert_eq!(tilted_claim_law(&source, &id).unwrap(), source);
        // divergent normaliser is an error
        assert!(esscher_tilt(3.0, &source).is_err());
    }

    #[test]
    fn esscher_exponential_shift() {
        let source = exp(2.0);
        let tilt = esscher_tilt(1.0, &source).unwrap();
        assert_eq!(tilted_claim_law(&source, &tilt).unwrap(), exp(1.0));
        // Esscher γ coincides with the density-ratio form of the paper:
        // γ(x) = ln(1 - c E[X]) + c x
        for x in [0.2, 1.4, 6.0] {
            assert_abs_diff_eq!(tilt.gamma(x), (1.0 - 0.5_f64).ln() + x, epsilon = 1e-12);
        }
    }

    #[test]
    fn validate_esscher_is_unit_mass() {
        for c in [0.5, 1.0, 2.5, 2.9] {
            let source = ga(3.0, 2.0);
            let tilt = esscher_tilt(c, &source).unwrap();
            let report = validate_tilt(&tilt, &source, 2, 1e-10).unwrap();
            assert!(report.converged, "c={c}");
            assert!((report.unit_mass - 1.0).abs() <= 1e-10, "c={c}: {}", report.unit_mass);
            assert!(report.pass);
            // tilted mean available in the report
            assert_abs_diff_eq!(report.moments[0], 2.0 / (3.0 - c), epsilon = 1e-8);
        }
    }

    #[test]
    fn validate_flags_unnormalised_weight() {
        let tilt = ClaimTilt::custom(|_| 2.0_f64.ln());
        let report = validate_tilt(&tilt, &exp(1.0), 1, 1e-8).unwrap();
        assert!(report.converged);
        assert_abs_diff_eq!(report.unit_mass, 2.0, epsilon = 1e-8);
        assert!(!report.pass);
    }

    #[test]
    fn premium_principle_gamma_claims_unit_mass() {
        // γ(x) = ln(E[X]/(2c)) - ln x + 2(c-1)/(c E[X]) · x on Ga(ζ, 2)
        // claims has unit weight mass and tilts to Exp(ζ/c).
        let (zeta, c) = (2.0, 3.0);
        let claims = ga(zeta, 2.0);
        let mean_x = claims.mean();
        let tilt = ClaimTilt::custom(move |x: f64| {
            (mean_x / (2.0 * c)).ln() - x.ln() + 2.0 * (c - 1.0) / (c * mean_x) * x
        });
        let report = validate_tilt(&tilt, &claims, 2, 1e-8).unwrap();
        assert!(report.pass, "unit mass {}", report.unit_mass);
        // Same γ expressed as a density ratio to Exp(ζ/c).
        let ratio = tilt_from_density_ratio(&claims, &exp(zeta / c));
        for i in 1..=60 {
            let x = 0.2 * i as f64;
            assert_abs_diff_eq!(tilt.gamma(x), ratio.gamma(x), epsilon = 1e-10);
        }
    }

    #[test]
    fn custom_tilt_has_no_closed_form_law() {
        let tilt = ClaimTilt::custom(|_| 0.0);
        assert!(matches!(
            tilted_claim_law(&exp(1.0), &tilt),
            Err(TiltError::Unsupported(_))
        ));
    }

    #[test]
    fn beta_tilt_condition_links_alpha_and_rate() {
        let mean_w = 2.0 / 2.0; // Ga(2,2) interarrivals
        let beta = BetaTilt::from_rate(ClaimTilt::identity(), 1.7, mean_w);
        assert_abs_diff_eq!(
            beta.alpha(),
            beta.implied_rate().ln() + mean_w.ln(),
            epsilon = 1e-12
        );
        let beta2 = BetaTilt::from_alpha(ClaimTilt::identity(), beta.alpha(), mean_w);
        assert_abs_diff_eq!(beta2.implied_rate(), 1.7, epsilon = 1e-12);
    }

    #[test]
    fn rrm_identity_measure_is_zero() {
        let s = spec(ga(1.0, 2.0), exp(1.0));
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = sample_path(&s, 6.0, &mut rng);
            for t in [0.0, 1.0, 3.7, 6.0] {
                let l = rrm_log_density(&p, t, &s, &s, &ClaimTilt::identity()).unwrap();
                assert_eq!(l, 0.0);
            }
        }
    }

    #[test]
    fn rrm_empty_product_is_survival_ratio() {
        // N_t = 0, source Exp(1), target Exp(2), t = 1 → ln(e^{-2}/e^{-1}) = -1
        let p = Path::from_draws(vec![2.0], vec![1.0], 1.5).unwrap();
        let source = spec(exp(1.0), exp(1.0));
        let target = spec(exp(2.0), exp(1.0));
        let l = rrm_log_density(&p, 1.0, &source, &target, &ClaimTilt::identity()).unwrap();
        assert_abs_diff_eq!(l, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn rrm_poisson_closed_form_on_forced_path() {
        // source Exp(θ), target Exp(ρ):
        // M_t = e^{Σγ(X_j)} (ρ/θ)^{N_t} e^{-t(ρ-θ)}
        let (theta, rho) = (1.0, 2.0);
        let source = spec(exp(theta), exp(1.0));
        let target = spec(exp(rho), exp(2.0));
        let tilt = tilt_from_density_ratio(&exp(1.0), &exp(2.0));
        let p = Path::from_draws(
            vec![0.4, 0.9, 0.3, 1.1, 2.2, 3.0],
            vec![0.5, 1.5, 0.7, 2.0, 0.2, 1.0],
            7.0,
        )
        .unwrap();
        for t in [0.2, 0.4, 1.0, 2.9, 5.0, 7.0] {
            let n = p.count_at(t).unwrap();
            let sum_gamma: f64 = p.claims()[..n].iter().map(|&x| tilt.gamma(x)).sum();
            let closed = sum_gamma + n as f64 * (rho / theta).ln() - t * (rho - theta);
            let got = rrm_log_density(&p, t, &source, &target, &tilt).unwrap();
            assert!((got - closed).abs() <= 1e-12, "t={t}: {got} vs {closed}");
        }
    }

    #[test]
    fn rrm_gamma_pair_closed_form_on_forced_path() {
        // Ga(ξ1, κ1) → Ga(ξ2, κ2) interarrivals:
        // factor (ξ2^κ2 Γ(κ1) / ξ1^κ1 Γ(κ2))^{N_t} · Π W_j^{κ2-κ1}
        //   · e^{-t(ξ2-ξ1)} · Erlang survival-sum ratio at t - T_{N_t}
        let (x1, k1, x2, k2) = (1.0_f64, 2.0_f64, 1.5_f64, 3.0_f64);
        let source = spec(ga(x1, k1), exp(1.0));
        let target = spec(ga(x2, k2), exp(2.0));
        let tilt = tilt_from_density_ratio(&exp(1.0), &exp(2.0));
        let p = Path::from_draws(
            vec![1.2, 0.7, 2.5, 0.9, 4.0],
            vec![0.5, 1.5, 0.7, 2.0, 0.2],
            8.0,
        )
        .unwrap();
        let erlang_sum = |xi: f64, k: u32, u: f64| -> f64 {
            let mut term = 1.0;
            let mut acc = 1.0;
            for i in 1..k {
                term *= xi * u / i as f64;
                acc += term;
            }
            acc
        };
        for t in [0.6, 1.2, 3.0, 5.2, 8.0] {
            let n = p.count_at(t).unwrap();
            let u = t - p.last_arrival_at_or_before(t).unwrap();
            let sum_gamma: f64 = p.claims()[..n].iter().map(|&x| tilt.gamma(x)).sum();
            let const_factor = (k2 * x2.ln() + statrs::function::gamma::ln_gamma(k1)
                - k1 * x1.ln()
                - statrs::function::gamma::ln_gamma(k2))
                * n as f64;
            let w_prod: f64 =
                p.interarrivals()[..n].iter().map(|w| (k2 - k1) * w.ln()).sum();
            let closed = sum_gamma + const_factor + w_prod - t * (x2 - x1)
                + (erlang_sum(x2, 3, u) / erlang_sum(x1, 2, u)).ln();
            let got = rrm_log_density(&p, t, &source, &target, &tilt).unwrap();
            assert!((got - closed).abs() <= 1e-12, "t={t}: {got} vs {closed}");
        }
    }

    #[test]
    fn rpm_matches_example_display_on_forced_path() {
        // Source Ga(ξ, 2), claims Ga(b, 2), target claims Exp(ζ):
        // M = (1/(2ξ))^{N_t} e^{Σβ - tρ + tξ} / (Π W_j · (1 + ξ(t - T_{N_t})))
        let (xi, b, zeta, rho) = (2.0, 2.0, 1.0, 1.0);
        let source = spec(ga(xi, 2.0), ga(b, 2.0));
        let gamma = tilt_from_density_ratio(&ga(b, 2.0), &exp(zeta));
        let beta = BetaTilt::from_rate(gamma.clone(), rho, source.interarrival.mean());
        let p = Path::from_draws(
            vec![0.8, 1.4, 0.5, 2.0, 3.5],
            vec![1.1, 0.4, 2.2, 0.9, 1.5],
            6.0,
        )
        .unwrap();
        for t in [0.5, 1.3, 2.6, 4.4, 6.0] {
            let n = p.count_at(t).unwrap();
            let u = t - p.last_arrival_at_or_before(t).unwrap();
            let sum_beta: f64 = p.claims()[..n].iter().map(|&x| beta.beta(x)).sum();
            let ln_w_prod: f64 = p.interarrivals()[..n].iter().map(|w| w.ln()).sum();
            let closed = n as f64 * (1.0 / (2.0 * xi)).ln() + sum_beta - t * rho + t * xi
                - ln_w_prod
                - (1.0 + xi * u).ln();
            let got = rpm_log_density(&p, t, &source, &beta).unwrap();
            assert!((got - closed).abs() <= 1e-11, "t={t}: {got} vs {closed}");
        }
    }

    #[test]
    fn rpm_coincides_with_rrm_for_exponential_target() {
        let source = spec(ga(2.0, 2.0), ga(2.0, 2.0));
        let gamma = tilt_from_density_ratio(&ga(2.0, 2.0), &exp(1.0));
        let beta = BetaTilt::from_rate(gamma.clone(), 1.0, source.interarrival.mean());
        let target = build_target_measure(&source, &gamma, exp(1.0)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..100 {
            let p = sample_path(&source, 5.0, &mut rng);
            for t in [0.0, 0.7, 2.2, 5.0] {
                let a = rrm_log_density(&p, t, &source, &target, &gamma).unwrap();
                let b = rpm_log_density(&p, t, &source, &beta).unwrap();
                assert!((a - b).abs() <= 1e-10, "t={t}: rrm {a} vs rpm {b}");
            }
        }
    }

    #[test]
    fn rpm_at_time_zero_is_zero() {
        let source = spec(ga(2.0, 2.0), exp(1.0));
        let beta = BetaTilt::from_rate(ClaimTilt::identity(), 1.0, 1.0);
        let p = Path::from_draws(vec![1.0], vec![1.0], 0.5).unwrap();
        assert_eq!(rpm_log_density(&p, 0.0, &source, &beta).unwrap(), 0.0);
    }

    #[test]
    fn evaluators_reject_t_beyond_horizon() {
        let source = spec(exp(1.0), exp(1.0));
        let p = Path::from_draws(vec![2.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(
            rrm_log_density(&p, 1.5, &source, &source, &ClaimTilt::identity()),
            Err(EvalError::Process(_))
        ));
    }

    #[test]
    fn degenerate_tail_is_reported_not_infinite() {
        // Weibull(3, 0.1) survival at u = 40 is far below 1e-300.
        let source = spec(ParamDistribution::weibull(3.0, 0.1).unwrap(), exp(1.0));
        let target = spec(exp(1.0), exp(1.0));
        let p = Path::from_draws(vec![50.0], vec![1.0], 40.0).unwrap();
        let err = rrm_log_density(&p, 40.0, &source, &target, &ClaimTilt::identity());
        assert!(matches!(err, Err(EvalError::DegenerateTail { .. })), "{err:?}");
    }

    #[test]
    fn convert_to_cpp_example_parameters() {
        // Ga(ξ, 2) interarrivals, α = ln(2ρ/ξ) → Exp(ρ) interarrivals, Exp(ζ) claims.
        let (xi, rho, b, zeta) = (2.0, 1.0, 2.0, 1.0);
        let source = spec(ga(xi, 2.0), ga(b, 2.0));
        let gamma = tilt_from_density_ratio(&ga(b, 2.0), &exp(zeta));
        let beta = BetaTilt::from_alpha(gamma, (2.0 * rho / xi).ln(), source.interarrival.mean());
        let q = convert_to_cpp(&source, &beta).unwrap();
        assert_eq!(q.interarrival, exp(rho));
        assert_eq!(q.claim, exp(zeta));
    }

    #[test]
    fn identity_conversion_gives_reciprocal_mean_rate() {
        // identity tilt, α = -ln E[W] → ρ = 1/E[W]
        let source = spec(ga(2.0, 2.0), exp(1.0));
        let mean_w = source.interarrival.mean();
        let beta = BetaTilt::from_alpha(ClaimTilt::identity(), -mean_w.ln(), mean_w);
        assert_abs_diff_eq!(beta.implied_rate(), 1.0 / mean_w, epsilon = 1e-14);
        let q = convert_to_cpp(&source, &beta).unwrap();
        assert_eq!(q.interarrival, exp(1.0 / mean_w));
        assert_eq!(q.claim, source.claim);
    }

    #[test]
    fn build_target_identity_returns_source_laws() {
        let source = spec(ga(1.0, 2.0), exp(1.0));
        let q = build_target_measure(&source, &ClaimTilt::identity(), ga(1.0, 2.0)).unwrap();
        assert_eq!(q.interarrival, source.interarrival);
        assert_eq!(q.claim, source.claim);
    }

    #[test]
    fn round_trip_reconstructs_weight() {
        let source_claim = ga(3.0, 2.0);
        let tilt = esscher_tilt(1.0, &source_claim).unwrap();
        let tilted = tilted_claim_law(&source_claim, &tilt).unwrap();
        let reconstructed = tilt_from_density_ratio(&source_claim, &tilted);
        for i in 1..=100 {
            let x = source_claim.quantile(i as f64 / 101.0).unwrap();
            let w0 = tilt.weight(x);
            let w1 = reconstructed.weight(x);
            assert!((w1 - w0).abs() <= 1e-10 * w0.max(1.0), "x={x}: {w1} vs {w0}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn rrm_rpm_coincide_on_random_paths(seed in 0u64..10_000, rho in 0.3f64..3.0) {
            let source = spec(ga(1.5, 2.0), ga(2.0, 2.0));
            let gamma = tilt_from_density_ratio(&ga(2.0, 2.0), &exp(1.0));
            let beta = BetaTilt::from_rate(gamma.clone(), rho, source.interarrival.mean());
            let target = build_target_measure(&source, &gamma, exp(rho)).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let p = sample_path(&source, 4.0, &mut rng);
            for t in [0.9, 2.1, 4.0] {
                let a = rrm_log_density(&p, t, &source, &target, &gamma).unwrap();
                let b = rpm_log_density(&p, t, &source, &beta).unwrap();
                prop_assert!((a - b).abs() <= 1e-10);
                prop_assert!(a.is_finite());
            }
        }
    }
}
