//! Numerical renewal theory: expected counts `E[N_t]`, the Poisson
//! linearity test, and the Laplace–Stieltjes consistency check.
//!
//! `E[N_t] = Σ_{n≥1} K^{*n}(t)` is summed as a series of convolution CDFs.
//! The gamma family is closed under convolution (`Ga(ξ,κ)^{*n} = Ga(ξ,nκ)`),
//! so exponential and gamma interarrivals are exact up to truncation; a
//! genuine Weibull (shape > 1) falls back to a discrete renewal recursion on
//! a midpoint-mass grid.

use statrs::function::gamma::gamma_lr;

use crate::distributions::ParamDistribution;

/// Expected number of renewals by time `t` for interarrival law `k`.
///
/// The convolution series is truncated once a term drops below `tail_tol`;
/// terms are monotone decreasing in `n`, so the dropped tail is of the same
/// order as the tolerance.
pub fn renewal_mean(k: &ParamDistribution, t: f64, tail_tol: f64) -> f64 {
    assert!(t >= 0.0 && t.is_finite(), "t must be nonnegative, got {t}");
    assert!(tail_tol > 0.0, "tail_tol must be positive");
    if t == 0.0 {
        return 0.0;
    }
    match gamma_form(k) {
        Some((rate, shape)) => convolution_series(rate, shape, t, tail_tol),
        None => {
            let (shape, scale) = match *k {
                ParamDistribution::Weibull { shape, scale } => (shape, scale),
                _ => unreachable!("gamma_form covers the other families"),
            };
            *weibull_renewal_grid(shape, scale, t).1.last().unwrap()
        }
    }
}

/// `(rate, shape)` when the law is gamma-closed under convolution;
/// `Weibull(1, b)` coincides with `Exp(1/b)` and is folded in.
fn gamma_form(k: &ParamDistribution) -> Option<(f64, f64)> {
    match *k {
        ParamDistribution::Exponential { rate } => Some((rate, 1.0)),
        ParamDistribution::Gamma { rate, shape } => Some((rate, shape)),
        ParamDistribution::Weibull { shape, scale } if shape == 1.0 => Some((1.0 / scale, 1.0)),
        ParamDistribution::Weibull { .. } => None,
    }
}

fn convolution_series(rate: f64, shape: f64, t: f64, tail_tol: f64) -> f64 {
    let z = rate * t;
    let mut sum = 0.0;
    for n in 1..=1_000_000_u64 {
        let term = gamma_lr(n as f64 * shape, z);
        sum += term;
        if term < tail_tol {
            break;
        }
    }
    sum
}

/// Discrete renewal recursion on a midpoint-mass grid.
///
/// Cell `i` carries mass `F((i+1)Δ) - F(iΔ)` thought of as an atom at the
/// cell midpoint; the recursion solves `m(t) = F(t) + ∫ m(t-s) dF(s)` with
/// the midpoint handled by averaging adjacent grid values. Step
/// `Δ = mean/2000`, widened so the grid never exceeds 20000 cells.
///
/// Returns `(Δ, m)` with `m[j] ≈ E[N_{jΔ}]` and the last index at `t`.
fn weibull_renewal_grid(shape: f64, scale: f64, t: f64) -> (f64, Vec<f64>) {
    let law = ParamDistribution::Weibull { shape, scale };
    let mean = law.mean();
    let nominal = mean / 2000.0;
    let cells = ((t / nominal).ceil() as usize).clamp(10, 20_000);
    let delta = t / cells as f64;

    // cell masses q[i] = F((i+1)Δ) - F(iΔ)
    let mut cdf_prev = 0.0;
    let mut q = Vec::with_capacity(cells);
    for i in 0..cells {
        let cdf_next = law.cdf((i + 1) as f64 * delta).expect("x >= 0");
        q.push(cdf_next - cdf_prev);
        cdf_prev = cdf_next;
    }

    let mut m = vec![0.0_f64; cells + 1];
    let mut cdf_grid = vec![0.0_f64; cells + 1];
    let mut acc = 0.0;
    for (i, qi) in q.iter().enumerate() {
        acc += qi;
        cdf_grid[i + 1] = acc;
    }

    for j in 1..=cells {
        // m_j = F_j + Σ_{i<j} q_i (m_{j-i} + m_{j-i-1})/2, with the i = 0
        // term containing m_j itself; solve for m_j.
        let mut rhs = cdf_grid[j];
        for (i, qi) in q.iter().enumerate().take(j) {
            rhs += 0.5 * qi * m[j - i - 1];
            if i > 0 {
                rhs += 0.5 * qi * m[j - i];
            }
        }
        m[j] = rhs / (1.0 - 0.5 * q[0]);
    }
    (delta, m)
}

/// Expected counts at several times, sharing work where the family allows.
fn renewal_means(k: &ParamDistribution, ts: &[f64], tail_tol: f64) -> Vec<f64> {
    if gamma_form(k).is_some() {
        return ts.iter().map(|&t| renewal_mean(k, t, tail_tol)).collect();
    }
    let (shape, scale) = match *k {
        ParamDistribution::Weibull { shape, scale } => (shape, scale),
        _ => unreachable!(),
    };
    let t_max = ts.iter().copied().fold(0.0_f64, f64::max);
    if t_max == 0.0 {
        return vec![0.0; ts.len()];
    }
    let (delta, m) = weibull_renewal_grid(shape, scale, t_max);
    ts.iter()
        .map(|&t| {
            let j = ((t / delta).round() as usize).min(m.len() - 1);
            m[j]
        })
        .collect()
}

/// Outcome of the computable Poisson-characterisation surrogate: the
/// renewal mean is linear in `t` exactly for exponential interarrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    /// `(t, relative deviation of E[N_t] from t/E[W])` per grid point.
    pub deviations: Vec<(f64, f64)>,
    pub max_rel_dev: f64,
    pub is_linear: bool,
}

/// Compare `E[N_t]` against the line `t / E[W]` on a grid. `is_linear`
/// requires the maximum relative deviation to stay within `10 · tail_tol`.
pub fn poisson_linearity_report(
    k: &ParamDistribution,
    grid: &[f64],
    tail_tol: f64,
) -> LinearityReport {
    assert!(!grid.is_empty(), "grid must be nonempty");
    assert!(grid.iter().all(|&t| t > 0.0), "grid values must be positive");
    let means = renewal_means(k, grid, tail_tol);
    let rate = 1.0 / k.mean();
    let deviations: Vec<(f64, f64)> = grid
        .iter()
        .zip(means)
        .map(|(&t, m)| (t, (m - t * rate).abs() / (t * rate)))
        .collect();
    let max_rel_dev = deviations.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    LinearityReport { deviations, max_rel_dev, is_linear: max_rel_dev <= 10.0 * tail_tol }
}

/// Consistency of the renewal function with the Laplace–Stieltjes identity
/// `Û(s) = 1 / (1 - K̂(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstReport {
    pub max_abs_dev: f64,
    /// Grid points too close to `s = 0` to evaluate (`K̂ → 1`, `Û → ∞`).
    pub flagged_boundary: Vec<f64>,
}

/// For exponential interarrivals, checks `K̂(s) = θ/(θ+s)` directly. For a
/// general law, Laplace-transforms a numerically computed renewal mean by
/// trapezoid rule on a truncated domain and compares with `1/(1 - K̂(s))`.
pub fn lst_relation_check(k: &ParamDistribution, s_grid: &[f64]) -> LstReport {
    assert!(!s_grid.is_empty(), "s grid must be nonempty");
    const BOUNDARY: f64 = 1e-8;
    let mut flagged = Vec::new();
    let mut active = Vec::new();
    for &s in s_grid {
        assert!(s >= 0.0, "s must be nonnegative, got {s}");
        if s < BOUNDARY {
            flagged.push(s);
        } else {
            active.push(s);
        }
    }
    if active.is_empty() {
        return LstReport { max_abs_dev: 0.0, flagged_boundary: flagged };
    }

    let max_dev = if let ParamDistribution::Exponential { rate } = *k {
        active
            .iter()
            .map(|&s| (k.lst(s).expect("s >= 0") - rate / (rate + s)).abs())
            .fold(0.0, f64::max)
    } else {
        let s_min = active.iter().copied().fold(f64::INFINITY, f64::min);
        let t_max = 40.0 / s_min;
        let steps = 4000;
        let h = t_max / steps as f64;
        let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
        let m = renewal_means(k, &grid, 1e-12);
        let mean = k.mean();
        active
            .iter()
            .map(|&s| {
                // Û(s) = 1 + e^{-sT} m(T) + s ∫_0^T e^{-su} m(u) du
                //        + e^{-sT}/(s·mean)   (renewal-density tail)
                let mut integral = 0.0;
                for i in 0..steps {
                    let u0 = grid[i];
                    let u1 = grid[i + 1];
                    integral +=
                        0.5 * h * ((-s * u0).exp() * m[i] + (-s * u1).exp() * m[i + 1]);
                }
                let tail = (-s * t_max).exp();
                let u_hat = 1.0 + tail * m[steps] + s * integral + tail / (s * mean);
                let k_hat = k.lst(s).expect("s >= 0");
                (u_hat - 1.0 / (1.0 - k_hat)).abs()
            })
            .fold(0.0, f64::max)
    };
    LstReport { max_abs_dev: max_dev, flagged_boundary: flagged }
}
