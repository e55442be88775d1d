//! Adaptive Gauss–Kronrod quadrature (G7–K15).
//!
//! Small, dependency-free integrator used for tilt validation and the
//! transforms without closed form. Bisects the interval with the largest
//! error estimate until the summed estimate meets the tolerance.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {estimate}, error {error} > tol {tol}")]
    NonConvergent { estimate: f64, error: f64, tol: f64 },
    #[error("quadrature produced a non-finite value")]
    NonFinite,
}

// 15-point Kronrod abscissae on [0, 1] side of the symmetric rule; the last
// entry is the midpoint. Every other node (odd indices plus the midpoint)
// is a 7-point Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_67,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One G7/K15 evaluation over `[a, b]`: returns the K15 estimate and an
/// error estimate in the QUADPACK style.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;

    for i in 0..7 {
        let offset = half * XGK[i];
        let sum = f(center - offset) + f(center + offset);
        kronrod += WGK[i] * sum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * sum;
        }
    }

    kronrod *= half;
    gauss *= half;

    let diff = (kronrod - gauss).abs();
    // Sharpened estimate when the rules already agree closely.
    let scaled = (200.0 * diff).powf(1.5);
    let err = if scaled < diff { scaled } else { diff };
    (kronrod, err)
}

struct Segment {
    a: f64,
    b: f64,
    estimate: f64,
    error: f64,
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_SEGMENTS: usize = 4096;

    let (estimate, error) = gk15(&f, a, b);
    let mut segments = vec![Segment { a, b, estimate, error }];
    let mut total_err: f64 = error;
    let mut total_est: f64 = estimate;

    while total_err > abs_tol && segments.len() < MAX_SEGMENTS {
        // Split the segment with the largest error estimate.
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.error.total_cmp(&y.error))
            .map(|(i, _)| i)
            .expect("segment list is never empty");
        let seg = segments.swap_remove(worst);

        let width = seg.b - seg.a;
        if width.abs() <= f64::EPSILON * (seg.a.abs() + seg.b.abs()).max(f64::MIN_POSITIVE) {
            // Interval exhausted at machine precision; keep its estimate.
            segments.push(seg);
            break;
        }

        let mid = seg.a + 0.5 * width;
        let (left_est, left_err) = gk15(&f, seg.a, mid);
        let (right_est, right_err) = gk15(&f, mid, seg.b);

        total_est += left_est + right_est - seg.estimate;
        total_err += left_err + right_err - seg.error;
        segments.push(Segment { a: seg.a, b: mid, estimate: left_est, error: left_err });
        segments.push(Segment { a: mid, b: seg.b, estimate: right_est, error: right_err });
    }

    if !total_est.is_finite() {
        return Err(QuadError::NonFinite);
    }
    if total_err > abs_tol {
        return Err(QuadError::NonConvergent { estimate: total_est, error: total_err, tol: abs_tol });
    }
    Ok(total_est)
}

/// Integrate to a relative tolerance: a rough pass fixes the scale, a second
/// pass refines to `rel_tol` of that scale.
pub fn integrate_rel<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    let rough = integrate(&f, a, b, 1e-6)?;
    let scale = rough.abs().max(1e-12);
    integrate(&f, a, b, rel_tol * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let got = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_tail() {
        // ∫_0^10 e^{-x^2/2} dx = sqrt(pi/2) erf(10/sqrt(2)) ≈ sqrt(pi/2)
        let got = integrate(|x: f64| (-0.5 * x * x).exp(), 0.0, 10.0, 1e-12).unwrap();
        assert_abs_diff_eq!(got, (std::f64::consts::PI / 2.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let got = integrate(|x: f64| x.powf(-0.5), 1e-300, 1.0, 1e-8).unwrap();
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn relative_tolerance_scales() {
        let got = integrate_rel(|x: f64| 1e6 * (-x).exp(), 0.0, 50.0, 1e-10).unwrap();
        assert_abs_diff_eq!(got, 1e6, epsilon = 1e-3);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x: f64| x.exp(), 3.0, 3.0, 1e-12).unwrap(), 0.0);
    }
}
