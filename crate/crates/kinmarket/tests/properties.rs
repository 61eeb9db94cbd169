//! Property tests for the price mathematics, demand curves, sampling
//! supports and serialization round trips, plus the statistical invariants
//! of the Monte Carlo engine.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kinmarket::experiment::fmt_f64;
use kinmarket::fokker_planck::{kappa, lognormal_from_moments};
use kinmarket::kinetic::run_simulation;
use kinmarket::market::{sample_eta, sample_gamma, DemandCurve, ModelParams};
use kinmarket::price::{
    equilibrium_price, future_price, g_transform, growth_envelope, integrate_price_ode,
    RootFindConfig,
};

fn any_curve() -> impl Strategy<Value = DemandCurve> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|c| DemandCurve::constant(c).unwrap()),
        ((0.05f64..0.9), (1e-3f64..0.1))
            .prop_map(|(c1, c2)| DemandCurve::exponential_decay(c1, c2).unwrap()),
    ]
}

fn price() -> impl Strategy<Value = f64> {
    // Log-uniform over a wide but float-safe range.
    (-6.0f64..6.0).prop_map(|e| 10f64.powf(e))
}

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-4f64..0.1]
}

fn dividend() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-4f64..1.0]
}

proptest! {
    #[test]
    fn mu_is_non_increasing_and_in_unit_interval(curve in any_curve(),
                                                 a in price(), b in price()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (mu_lo, mu_hi) = (curve.mu(lo), curve.mu(hi));
        prop_assert!(mu_lo >= mu_hi);
        prop_assert!(mu_lo > 0.0 && mu_lo < 1.0);
        prop_assert!(curve.mu_deriv(a) <= 0.0);
    }

    #[test]
    fn mu_deriv_matches_central_differences(c1 in 0.05f64..0.9, c2 in 1e-3f64..0.1,
                                            frac in 0.0f64..1.0) {
        // Keep c2 * s moderate so the finite difference is not destroyed by
        // cancellation in the exponential tail.
        let s = frac * (12.0 / c2).min(1e4);
        let curve = DemandCurve::exponential_decay(c1, c2).unwrap();
        let h = 1e-4 * s.max(1.0);
        let fd = (curve.mu(s + h) - curve.mu((s - h).max(0.0))) / (h + (s - (s - h).max(0.0)));
        let exact = curve.mu_deriv(s);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs(),
            "fd {fd} vs exact {exact} at s = {s}");
    }

    #[test]
    fn g_transform_is_strictly_increasing(curve in any_curve(), a in price(), b in price()) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(g_transform(&curve, lo) < g_transform(&curve, hi));
    }

    #[test]
    fn future_price_round_trip_and_ordering(curve in any_curve(), s in 0.1f64..1e4,
                                            r in rate(), d in dividend()) {
        let cfg = RootFindConfig::exact();
        let sp = future_price(&curve, s, r, d, &cfg).unwrap();
        let target = g_transform(&curve, s) * (1.0 + r) + d;
        prop_assert!((g_transform(&curve, sp) - target).abs()
            <= 1e-10 * target.abs().max(1.0));
        if r == 0.0 && d == 0.0 {
            prop_assert_eq!(sp, s);
        } else {
            prop_assert!(sp > s);
        }
    }

    #[test]
    fn equilibrium_price_is_a_fixed_point(curve in any_curve(), mean_w in 1.0f64..1e6,
                                          n_pc in 0.1f64..100.0) {
        let s = equilibrium_price(&curve, mean_w, n_pc, &RootFindConfig::exact()).unwrap();
        prop_assert!(s > 0.0);
        let tol = RootFindConfig::for_price_scale(s).abs_tol;
        prop_assert!((s * n_pc - curve.mu(s) * mean_w).abs() < tol * n_pc,
            "clearance residual too large at s = {s}");
    }

    #[test]
    fn constant_curve_closed_forms_match_bisection(c in 0.05f64..0.95, s in 0.1f64..1e4,
                                                   r in rate(), d in dividend(),
                                                   mean_w in 1.0f64..1e6) {
        let curve = DemandCurve::constant(c).unwrap();
        let cfg = RootFindConfig::exact();
        let sp = future_price(&curve, s, r, d, &cfg).unwrap();
        let closed = (1.0 + r) * s + c / (1.0 - c) * d;
        prop_assert!((sp - closed).abs() <= 1e-10 * closed.max(1.0));
        let se = equilibrium_price(&curve, mean_w, 10.0, &cfg).unwrap();
        let closed = c * mean_w / 10.0;
        prop_assert!((se - closed).abs() <= 1e-10 * closed.max(1.0));
    }

    #[test]
    fn kappa_lies_in_unit_interval(curve in any_curve(), s in 1e-6f64..1e6) {
        let k = kappa(&curve, s);
        prop_assert!(k > 0.0 && k <= 1.0, "kappa = {k}");
        if let DemandCurve::Constant { .. } = curve {
            prop_assert_eq!(k, 1.0);
        }
    }

    #[test]
    fn constant_mu_ode_stays_under_growth_envelope(c in 0.1f64..0.9, r in 1e-3f64..0.05,
                                                   d in dividend()) {
        let curve = DemandCurve::constant(c).unwrap();
        let path = integrate_price_ode(&curve, 50.0, r, d, 50.0, 0.5).unwrap();
        for (t, s) in path {
            let (_, bound) = growth_envelope(&curve, 50.0, 1000.0, r, d, t);
            prop_assert!(s <= bound * (1.0 + 1e-9), "s = {s} above envelope {bound} at t = {t}");
        }
    }

    #[test]
    fn sampling_supports_hold(curve in any_curve(), s in 0.1f64..1e3,
                              zeta in 0.0f64..0.5, sigma_rel in 0.0f64..0.5,
                              seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 0.015;
        let sigma = sigma_rel * s;
        for _ in 0..64 {
            let g = sample_gamma(&curve, s, zeta, &mut rng);
            prop_assert!((0.0..=1.0).contains(&g));
            let e = sample_eta(s, d, sigma, &mut rng);
            prop_assert!(e.abs() <= s + d);
        }
    }

    #[test]
    fn gini_is_scale_invariant_and_bounded(wealth in proptest::collection::vec(0.0f64..1e6, 2..200),
                                           scale in 1e-3f64..1e3) {
        prop_assume!(wealth.iter().any(|&w| w > 0.0));
        let g = kinmarket::analysis::gini(&wealth).unwrap();
        let n = wealth.len() as f64;
        prop_assert!((0.0..=1.0 - 1.0 / n + 1e-12).contains(&g));
        let scaled: Vec<f64> = wealth.iter().map(|w| w * scale).collect();
        let gs = kinmarket::analysis::gini(&scaled).unwrap();
        prop_assert!((g - gs).abs() < 1e-10);
    }

    #[test]
    fn float_serialization_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

/// Seed-averaged statistical invariants of the noisy engine, at a reduced
/// scale (200 agents, 100 steps, 24 seeds) that keeps the standard errors
/// far from the asserted bounds.
#[test]
fn engine_statistical_invariants() {
    let curve = DemandCurve::constant(0.5).unwrap();
    let n_agents = 200;
    let steps = 100;
    let records: Vec<_> = (1..=24u64)
        .map(|seed| {
            let params = ModelParams {
                r: 0.01,
                dividend: 0.015,
                zeta: 0.2,
                sigma: 15.0,
                n_pc: 10.0,
                n_agents,
                steps,
                seed,
            };
            run_simulation(&params, &curve, 50.0, 500.0, &[]).unwrap()
        })
        .collect();

    // Mean wealth is nondecreasing in expectation: the seed average of each
    // one-step increment stays above -4 standard errors of that average.
    for t in 0..steps {
        let deltas: Vec<f64> = records
            .iter()
            .map(|r| r.states[t + 1].mean_w - r.states[t].mean_w)
            .collect();
        let m = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let var = deltas.iter().map(|d| (d - m) * (d - m)).sum::<f64>()
            / (deltas.len() - 1) as f64;
        let se = (var / deltas.len() as f64).sqrt();
        assert!(m >= -4.0 * se, "mean wealth drop at t = {t}: {m} (se {se})");
    }

    // Share conservation in expectation: the realized invested fraction
    // times mean wealth re-buys the fixed share supply at the new price.
    let bound = 5.0 * 10.0 / (n_agents as f64).sqrt();
    for record in &records {
        for st in &record.states[1..] {
            let implied = st.mean_gamma * st.mean_w / st.s;
            assert!(
                (implied - 10.0).abs() <= bound,
                "implied shares per agent {implied} at t = {}",
                st.t
            );
        }
    }
}

/// Moment-matched lognormal fit recovers the generating parameters from
/// genuine lognormal samples within sampling error.
#[test]
fn lognormal_fit_recovers_parameters() {
    use rand::Rng;
    let (a, b) = (0.8f64, 0.4f64);
    let m = a - 0.5 * b;
    let mut fits_a = Vec::new();
    let mut fits_b = Vec::new();
    for seed in 0..16u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let sample: Vec<f64> = (0..8000)
            .map(|_| (m + b.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp())
            .collect();
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let second = sample.iter().map(|w| w * w).sum::<f64>() / n;
        let fit = lognormal_from_moments(mean, second).unwrap();
        fits_a.push(fit.a);
        fits_b.push(fit.b);
    }
    for (fits, truth) in [(fits_a, a), (fits_b, b)] {
        let mean = fits.iter().sum::<f64>() / fits.len() as f64;
        let var = fits.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (fits.len() - 1) as f64;
        let se = (var / fits.len() as f64).sqrt();
        assert!((mean - truth).abs() < 4.0 * se, "fit {mean} vs {truth} (se {se})");
    }
}
