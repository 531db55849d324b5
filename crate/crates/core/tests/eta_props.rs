use proptest::prelude::*;

use redisgrowth::eta::{
    border_growth, clt_params, growth_condition, lognormal_params, tail_stats, BorderCase,
};
use redisgrowth::trajectory::run_trajectory;
use redisgrowth::{DrawMatrix, EtaSpec, FiscalPolicy, RiskPreset, Scheme};

fn spec() -> impl Strategy<Value = EtaSpec> {
    (0.05..5.0f64, 0.0..0.95f64).prop_map(|(mean, f)| EtaSpec::new(mean, mean * (1.0 - f)).unwrap())
}

proptest! {
    #[test]
    fn parameters_round_trip(s in spec()) {
        let p = lognormal_params(&s).unwrap();
        prop_assert!((p.mean() - s.mean).abs() <= 1e-12 * s.mean);
        prop_assert!((p.geomean() - s.geomean).abs() <= 1e-12 * s.mean);
        prop_assert!(p.sigma >= 0.0);
    }

    #[test]
    fn condition_forms_agree(s in spec()) {
        let c = growth_condition(&s).unwrap();
        let p = lognormal_params(&s).unwrap();
        prop_assert_eq!(c.holds, p.mu < 0.0 && 0.0 < s.mean.ln());
        // the variance form only differs from the direct one on the boundary
        if (p.sigma * p.sigma + 2.0 * p.mu).abs() > 1e-9 && p.mu.abs() > 1e-9 {
            prop_assert_eq!(c.holds, c.holds_variance_form);
        }
    }

    #[test]
    fn clt_is_linear_in_time(s in spec(), t in 0.0..1e3f64) {
        let p = lognormal_params(&s).unwrap();
        let (m, v) = clt_params(&p, t);
        prop_assert!((m - t * p.mu).abs() <= 1e-9 * (1.0 + t * p.mu.abs()));
        prop_assert!((v - t * p.sigma * p.sigma).abs() <= 1e-9 * (1.0 + v));
    }

    #[test]
    fn tails_are_probabilities(s in spec()) {
        let t = tail_stats(&s).unwrap();
        for p in [t.p_decline, t.p_double, t.p_tenfold] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert!(t.p_tenfold <= t.p_double);
    }

    #[test]
    fn border_case_one_is_retention(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let flat = EtaSpec::new(1.0, 1.0).unwrap();
        for s in Scheme::ALL {
            let g = border_growth(&FiscalPolicy::new(s, a, b).unwrap(), &flat, BorderCase::RedistributionOnly).unwrap();
            prop_assert!((g - (1.0 - a * b)).abs() <= 1e-15);
        }
    }
}

fn draws_1e6(spec: &EtaSpec, seed: u64) -> Vec<f64> {
    DrawMatrix::sample(spec, seed, 1000, 1000)
        .unwrap()
        .as_slice()
        .to_vec()
}

#[test]
fn empirical_tails_within_three_standard_errors() {
    for preset in RiskPreset::ALL {
        let spec = preset.spec();
        let draws = draws_1e6(&spec, 42);
        let n = draws.len() as f64;
        let t = tail_stats(&spec).unwrap();
        let freq = |f: &dyn Fn(f64) -> bool| draws.iter().filter(|&&x| f(x)).count() as f64 / n;
        for (p, emp) in [
            (t.p_decline, freq(&|x| x < 1.0)),
            (t.p_double, freq(&|x| x >= 2.0)),
            (t.p_tenfold, freq(&|x| x > 10.0)),
        ] {
            let se = (p * (1.0 - p) / n).sqrt();
            assert!(
                (emp - p).abs() <= 3.0 * se,
                "{}: {emp} vs {p}",
                preset.name()
            );
        }
    }
}

#[test]
fn sample_mean_and_log_mean() {
    let spec = RiskPreset::Intermediate.spec();
    let p = lognormal_params(&spec).unwrap();
    let draws = draws_1e6(&spec, 7);
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = spec.mean * ((p.sigma * p.sigma).exp() - 1.0).sqrt();
    assert!((mean - spec.mean).abs() <= 3.0 * sd / n.sqrt(), "{mean}");
    let log_mean = draws.iter().map(|x| x.ln()).sum::<f64>() / n;
    assert!(
        (log_mean - p.mu).abs() <= 3.0 * p.sigma / n.sqrt(),
        "{log_mean}"
    );
}

#[test]
fn one_step_expectation_matches_retention() {
    let spec = RiskPreset::LessRisky.spec();
    let runs = 20_000;
    for scheme in Scheme::ALL {
        let policy = FiscalPolicy::new(scheme, 0.4, 0.25).unwrap();
        let ys: Vec<f64> = (0..runs)
            .map(|s| run_trajectory(5, 2, &policy, &spec, s).unwrap().totals[1] / 5.0)
            .collect();
        let m = ys.iter().sum::<f64>() / runs as f64;
        let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let target = policy.retention() * spec.mean;
        assert!(
            (m - target).abs() <= 3.0 * (var / runs as f64).sqrt(),
            "{scheme}: {m} vs {target}"
        );
    }
}

#[test]
fn draws_are_keyed_by_seed_and_agent() {
    let spec = RiskPreset::MoreRisky.spec();
    let a = DrawMatrix::sample(&spec, 3, 100, 50).unwrap();
    let b = DrawMatrix::sample(&spec, 3, 100, 50).unwrap();
    let small = DrawMatrix::sample(&spec, 3, 10, 50).unwrap();
    let other = DrawMatrix::sample(&spec, 4, 10, 50).unwrap();
    assert_eq!(a.as_slice(), b.as_slice());
    for t in 0..50 {
        assert_eq!(&a.column(t)[..10], small.column(t));
        assert_ne!(small.column(t), other.column(t));
    }
}

#[test]
fn scale_multiplies_draws() {
    let base = RiskPreset::Intermediate.spec();
    let scaled = EtaSpec::with_scale(base.mean, base.geomean, 1.1).unwrap();
    let x = DrawMatrix::sample(&base, 9, 4, 20).unwrap();
    let y = DrawMatrix::sample(&scaled, 9, 4, 20).unwrap();
    for (u, v) in x.as_slice().iter().zip(y.as_slice()) {
        assert!((u * 1.1 - v).abs() <= 1e-12 * v);
    }
    assert!((scaled.effective_mean() - 1.65).abs() < 1e-12);
}

#[test]
fn invalid_specs() {
    assert!(EtaSpec::new(1.0, 1.5).is_err());
    assert!(EtaSpec::new(0.0, 0.0).is_err());
    assert!(EtaSpec::new(f64::NAN, 1.0).is_err());
    assert!(EtaSpec::with_scale(1.5, 1.0, 0.0).is_err());
}
