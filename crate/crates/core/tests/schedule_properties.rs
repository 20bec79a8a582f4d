use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use crs::schedule::{combine_rates, discretize, schedule_to_rate, solve_schedule, MetricWeight, NoiseSchedule};
use crs::zoo::{edm_noise_schedule, edm_schedule, EdmParams};
use crs::RateTable;

fn grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

fn table(f: impl Fn(f64) -> f64) -> RateTable {
    RateTable::from_fn(grid(2000), f).unwrap()
}

fn fraction_within(alphas: &[f64], lo: f64, hi: f64) -> f64 {
    alphas.iter().filter(|&&a| a >= lo && a <= hi).count() as f64 / alphas.len() as f64
}

#[test]
fn arcsine_rate_gives_cosine_at_midpoint() {
    let n = 4000;
    let xs: Vec<f64> = (0..=n).map(|i| (FRAC_PI_2 * i as f64 / n as f64).sin()).collect();
    let mut vs: Vec<f64> = xs[..n].iter().map(|a| 1.0 / (1.0 - a * a).sqrt()).collect();
    vs.push(2.0 * vs[n - 1]);
    let mut xs = xs;
    xs[n] = 1.0;
    let s = solve_schedule(&RateTable::new(xs, vs).unwrap(), 1.0, 1.0, 0.0, 1001).unwrap();
    assert!((s.alpha(0.5) - 0.5f64.sqrt()).abs() < 1e-4);
}

#[test]
fn piecewise_constant_rate_splits_time_two_to_one() {
    let rate = RateTable::new(vec![0.0, 0.5, 0.5 + 1e-12, 1.0], vec![2.0, 2.0, 1.0, 1.0]).unwrap();
    let s = solve_schedule(&rate, 1.0, 1.0, 0.0, 3001).unwrap();
    // ∫_0.5^1 1 = 0.5 of a total 1.5
    assert!((s.time_of(0.5) - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn larger_xi_moves_knots_toward_clean_end() {
    let rate = table(|a| 1.0 / (1.05 - a));
    let near_one = |xi: f64| {
        let s = solve_schedule(&rate, xi, 1.0, 0.0, 1001).unwrap();
        fraction_within(&discretize(&s, 100, false).unwrap(), 0.9, 1.0)
    };
    assert!(near_one(1.4) > near_one(1.0));
}

#[test]
fn cosine_schedule_rate_ratio() {
    let s = NoiseSchedule::from_fn(2001, |t| (FRAC_PI_2 * t).cos()).unwrap();
    let v = schedule_to_rate(&s).unwrap();
    assert!((v.eval(0.8) / v.eval(0.0) - 1.0 / 0.6).abs() < 1e-3);
    assert!(v.values().iter().all(|&x| x >= 0.0));
}

#[test]
fn linear_schedule_has_constant_rate() {
    let s = NoiseSchedule::from_fn(11, |t| 1.0 - t).unwrap();
    let v = schedule_to_rate(&s).unwrap();
    assert!(v.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
}

#[test]
fn single_component_combination_is_a_rescaling() {
    let rate = table(|a| 1.0 + (3.0 * a).sin().abs());
    let w = MetricWeight::new(1.0, 1.0).unwrap();
    let combined = combine_rates(&[(rate.clone(), w)], 0.0, 1.0).unwrap();
    let a = solve_schedule(&combined, 1.0, 1.0, 0.0, 1001).unwrap();
    let b = solve_schedule(&rate, 1.0, 1.0, 0.0, 1001).unwrap();
    assert!(a.sup_distance(&b) < 1e-9);

    let half = MetricWeight::new(0.5, 1.0).unwrap();
    let twin = combine_rates(&[(rate.clone(), half), (rate, half)], 0.0, 1.0).unwrap();
    let c = solve_schedule(&twin, 1.0, 1.0, 0.0, 1001).unwrap();
    assert!(c.sup_distance(&b) < 1e-9);
}

#[test]
fn two_peaked_combination_matches_brute_force_density() {
    let hi = |a: f64| 1.0 / (1.05 - a);
    let lo = |a: f64| 1.0 / (0.05 + a);
    let w = MetricWeight::new(0.5, 1.0).unwrap();
    let combined = combine_rates(&[(table(hi), w), (table(lo), w)], 0.0, 1.0).unwrap();
    let s = solve_schedule(&combined, 1.0, 1.0, 0.0, 4001).unwrap();
    let knots = discretize(&s, 2000, false).unwrap();

    // midpoint sums of the exact combined density
    let n = 200_000;
    let integral = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        (0..n).map(|i| f(a + (b - a) * (i as f64 + 0.5) / n as f64)).sum::<f64>() * (b - a) / n as f64
    };
    let (ch, cl) = (integral(&hi, 0.0, 1.0), integral(&lo, 0.0, 1.0));
    let density = |a: f64| 0.5 * hi(a) / ch + 0.5 * lo(a) / cl;
    for (a, b) in [(0.9, 1.0), (0.0, 0.1), (0.4, 0.6)] {
        let expected = integral(&density, a, b);
        let got = fraction_within(&knots, a, b);
        assert!((got - expected).abs() < 2e-3, "[{a}, {b}]: {got} vs {expected}");
    }
    // knots per unit alpha: dense at both ends
    let middle = fraction_within(&knots, 0.4, 0.6) / 0.2;
    assert!(fraction_within(&knots, 0.9, 1.0) / 0.1 > 2.0 * middle);
    assert!(fraction_within(&knots, 0.0, 0.1) / 0.1 > 2.0 * middle);
}

#[test]
fn edm_grid_with_unit_alpha_prepended() {
    let p = EdmParams::default();
    let grid = edm_schedule(&p, 1000).unwrap();
    assert_eq!(grid[0], 1.0);
    assert!((grid[1] - 0.999998).abs() < 1e-6);
    let s = edm_noise_schedule(&p, 1001).unwrap();
    let d = discretize(&s, 1000, true).unwrap();
    assert_eq!(d[0], 1.0);
    assert!((d[1] - 0.999998).abs() < 1e-6);
    assert!((d[1000] - 0.0125).abs() < 1e-6);
}

fn smooth_rate() -> impl Strategy<Value = (f64, f64, f64)> {
    // v(a) = c0 + c1 a + c2 sin(pi a), kept positive
    (0.2f64..3.0, -0.19f64..3.0, 0.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn constant_rate_and_equal_mass((c0, c1, c2) in smooth_rate()) {
        let f = move |a: f64| c0 + c1 * a + c2 * (PI * a).sin();
        let rate = table(f);
        let s = solve_schedule(&rate, 1.0, 1.0, 0.0, 1001).unwrap();
        prop_assert_eq!(s.alpha(0.0), 1.0);
        prop_assert_eq!(s.alpha(1.0), 0.0);
        let a = discretize(&s, 100, false).unwrap();
        let prods: Vec<f64> = a.windows(2).map(|w| f(0.5 * (w[0] + w[1])) * (w[0] - w[1])).collect();
        let masses: Vec<f64> = a.windows(2).map(|w| rate.integrate_pow(1.0, w[1], w[0])).collect();
        for series in [prods, masses] {
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let worst = series.iter().map(|p| (p / mean - 1.0).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 0.02, "{worst}");
        }
    }

    #[test]
    fn schedule_rate_schedule_round_trip(w in 0.0f64..0.9, amax in 0.9f64..=1.0, amin in 0.0f64..0.1) {
        let g = move |t: f64| (1.0 - w) * t + w * 0.5 * (1.0 - (PI * t).cos());
        let s = NoiseSchedule::from_fn(1000, |t| amax - (amax - amin) * g(t)).unwrap();
        let back = solve_schedule(&schedule_to_rate(&s).unwrap(), 1.0, amax, amin, 1000).unwrap();
        prop_assert!(back.sup_distance(&s) <= 1e-3, "{}", back.sup_distance(&s));
    }

    #[test]
    fn xi_concentrates_knots_at_the_peak(center in 0.2f64..0.8) {
        let rate = table(move |a| 0.1 + (-(a - center).powi(2) / 0.02).exp());
        let near = |xi: f64| {
            let s = solve_schedule(&rate, xi, 1.0, 0.0, 1001).unwrap();
            fraction_within(&discretize(&s, 200, false).unwrap(), center - 0.1, center + 0.1)
        };
        let (a, b, c) = (near(0.5), near(1.0), near(1.4));
        prop_assert!(a <= b && b <= c, "{a} {b} {c}");
    }
}
