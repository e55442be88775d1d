//! Scratch: grid-search free claim parameters for the two convertible
//! gamma scenarios, scoring criterion-9-style margins.
use crp_core::montecarlo::functionals;
use crp_core::process::MeasureSpec;
use crp_core::tilt::{tilt_from_density_ratio, BetaTilt};
use crp_core::{direct_expectation, is_expectation, ChangeOfMeasure, ParamDistribution, Path};

fn exp(r: f64) -> ParamDistribution { ParamDistribution::exponential(r).unwrap() }
fn ga(r: f64, s: f64) -> ParamDistribution { ParamDistribution::gamma(r, s).unwrap() }

fn score(source: &MeasureSpec, rho: f64, target_claim: ParamDistribution, t: f64, label: &str) {
    let tilt = tilt_from_density_ratio(&source.claim, &target_claim);
    let beta = BetaTilt::from_rate(tilt, rho, source.interarrival.mean());
    let density = ChangeOfMeasure::Rpm { beta };
    let target = MeasureSpec::new(exp(rho), target_claim, "Q").unwrap();
    for (name, phi) in [
        ("N", functionals::count as fn(&Path, f64) -> f64),
        ("S", functionals::aggregate as fn(&Path, f64) -> f64),
    ] {
        let mut ok = 0;
        let mut worst = 0.0f64;
        let mut s42 = 0.0f64;
        for seed in 0..16u64 {
            let a = is_expectation(phi, source, &density, t, 100_000, 42 + seed).unwrap();
            let b = direct_expectation(phi, &target, t, 100_000, 1042 + seed).unwrap();
            let band = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            let ratio = (a.estimate - b.estimate).abs() / band;
            if ratio <= 1.0 { ok += 1; }
            if seed == 0 { s42 = ratio; }
            worst = worst.max(ratio);
        }
        println!("{label} {name}: {ok}/16, seed42 {s42:.2}, worst {worst:.2}");
    }
}

fn main() {
    let inter = ga(2.0, 2.0);
    // 3.1 candidates: claims Ga(b,2) -> Exp(zeta), rho = 1
    for (b, zeta) in [(2.0, 1.0), (3.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 2.0), (3.0, 2.0)] {
        let source = MeasureSpec::new(inter, ga(b, 2.0), "P").unwrap();
        score(&source, 1.0, exp(zeta), 0.5, &format!("3.1 b={b} zeta={zeta}"));
    }
    // 4.1 candidates: claims Ga(zeta,2) -> Exp(zeta/c), rho = 2/d
    for (zeta, c, d) in [(2.0, 2.05, 1.99), (4.0, 2.05, 1.99), (4.0, 2.5, 1.99), (2.0, 3.0, 1.99), (4.0, 2.02, 1.99)] {
        let source = MeasureSpec::new(inter, ga(zeta, 2.0), "P").unwrap();
        score(&source, 2.0 / d, exp(zeta / c), 0.5, &format!("4.1 zeta={zeta} c={c} d={d}"));
    }
}
