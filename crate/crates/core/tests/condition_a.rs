use std::f64::consts::PI;

use cns_core::condition_a::*;
use proptest::prelude::*;

fn with(f: impl Fn(&mut KatoIndices)) -> KatoIndices {
    let mut k = KatoIndices::reference();
    f(&mut k);
    k
}

#[test]
fn printed_sextuples_pass() {
    for idx in [KatoIndices::reference(), KatoIndices::reference_equal_p()] {
        let r = validate(&idx).unwrap();
        assert!(r.pass, "{}", r.table());
        for g in ["range", "A1", "A2", "A3", "A4"] {
            assert!(r.group_passes(g));
        }
    }
}

#[test]
fn boundary_sextuple_fails_where_expected() {
    let r = validate(&KatoIndices::new(2.0, 3.0, 2.0, 0.5, 1.0 / 6.0, 0.5)).unwrap();
    assert!(!r.pass);
    assert!(r.failed("p3 < 2"));
    assert!(r.failed("alpha3 < 1/2"));
    assert!(!r.failed("p3 >= 4/3"));
}

#[test]
fn single_perturbations_name_the_violated_condition() {
    let cases: Vec<(&str, KatoIndices)> = vec![
        ("p1 >= 1", with(|k| k.p1 = 0.5)),
        ("alpha1 >= 0", with(|k| k.alpha1 = -0.1)),
        ("alpha1 + 1/p1 = 1", with(|k| k.alpha1 = 0.6)),
        ("alpha2 + 1/p2 = 1/2", with(|k| k.alpha2 = 0.2)),
        ("alpha3 + 1/p3 = 1", with(|k| k.alpha3 = 0.4)),
        ("1/p1 + 1/p2 <= 1", with(|k| {
            k.p1 = 1.9;
            k.p2 = 1.9
        })),
        ("p2 > 2", with(|k| k.p2 = 2.0)),
        ("p3 >= 4/3", with(|k| k.p3 = 1.3)),
        ("p3 < 2", with(|k| k.p3 = 2.0)),
        ("1/p1 + 1/p3 <= 3/2", with(|k| {
            k.p1 = 1.0;
            k.p3 = 4.0 / 3.0
        })),
        ("1/p2 + 1/p3 < 3/2", with(|k| k.p2 = 1.0)),
        ("p1 >= 2", with(|k| k.p1 = 1.95)),
        ("1/p1 - 1/p2 >= 0", with(|k| k.p2 = 2.05)),
        ("1/p1 - 1/p2 < 1/2", with(|k| k.p1 = 1.0)),
        ("1/p3 - 1/p1 > 0", with(|k| k.p1 = 15.0 / 8.0)),
        ("1/p3 - 1/p1 <= 1/2", with(|k| k.p1 = 100.0)),
        ("alpha1 + alpha2 < 1", with(|k| k.alpha2 = 0.5)),
        ("alpha1 + alpha3 < 1", with(|k| k.alpha3 = 0.48)),
        ("alpha2 + alpha3 < 1", with(|k| k.alpha2 = 0.6)),
        ("alpha3 < 1/2", with(|k| k.alpha3 = 0.5)),
    ];
    for (name, idx) in cases {
        let r = validate(&idx).unwrap();
        assert!(!r.pass, "{name}");
        assert!(r.failed(name), "{name} not flagged:\n{}", r.table());
    }
}

#[test]
fn half_open_bounds_decided_as_printed() {
    // p3 = 4/3 is admissible for the p3 range
    let r = validate(&KatoIndices::critical(17.0 / 8.0, 3.0, 4.0 / 3.0)).unwrap();
    assert!(!r.failed("p3 >= 4/3"));
    let r = validate(&KatoIndices::critical(17.0 / 8.0, 3.0, 2.0)).unwrap();
    assert!(r.failed("p3 < 2"));
}

#[test]
fn nan_rejected() {
    assert!(validate(&with(|k| k.p2 = f64::NAN)).is_err());
    assert!(validate(&with(|k| k.alpha1 = f64::INFINITY)).is_err());
}

#[test]
fn beta_known_values() {
    assert!((beta_fn(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((beta_fn(0.5, 0.5).unwrap() - PI).abs() < 1e-12 * PI);
    assert!((beta_fn(2.0, 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-12 / 12.0);
    assert!(beta_fn(0.0, 1.0).is_err());
    assert!(beta_fn(-1.0, 1.0).is_err());
    let big = beta_fn(100.0, 80.0).unwrap();
    let small = beta_fn(99.0, 80.0).unwrap() * 99.0 / 179.0;
    assert!((big - small).abs() < 1e-10 * big);
}

/// `B(a, b)` from `B(a, b+2)(a+b)(a+b+1)/(b(b+1))`, with
/// `B(a, b+2) = a⁻¹∫₀¹(1−u^{1/a})^{b+1} du` by Simpson.
fn beta_by_quadrature(a: f64, b: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let f = |u: f64| (1.0 - u.powf(1.0 / a)).max(0.0).powf(b + 1.0);
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / a * (a + b) * (a + b + 1.0) / (b * (b + 1.0))
}

#[test]
fn reference_budget_regression() {
    let b = contraction_budget(&KatoIndices::reference(), 1.0, 1.0).unwrap();
    let golden = [
        (b.c112, 8.728252996344798),
        (b.c113, 256.5578998222832),
        (b.c223, 7.517826663626948),
        (b.c212, 7.2453980233565085),
        (b.c333, 16.514188030736683),
        (b.alpha_lin, 17.433045525270828),
        (b.k2, 4921.309144847444),
    ];
    for (got, want) in golden {
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
    }
    assert!(b.is_finite());
    assert!((b.eps_max * 4.0 * b.k1 * b.k2 - 1.0).abs() < 1e-12);
    // C113 = β(1 − 1/p3, 1 − α1 − α3) = β(7/15, 1/255)
    let oracle = beta_by_quadrature(7.0 / 15.0, 1.0 / 255.0);
    assert!((b.c113 - oracle).abs() < 1e-9 * oracle, "{} vs {oracle}", b.c113);
}

#[test]
fn budget_without_potential() {
    let b = contraction_budget(&KatoIndices::reference(), 0.0, 2.0).unwrap();
    assert_eq!(b.alpha_lin, 0.0);
    assert_eq!(b.k1, 1.0);
    assert!((b.k2 - (b.c112 + b.c113 + b.c223 + b.c212 + b.c333)).abs() < 1e-12 * b.k2);
    assert!(b.accept_epsilon(0.5 * b.eps_max).is_ok());
    assert!(b.accept_epsilon(b.eps_max).is_err());
    assert!((b.ball_radius(1e-3) - 2e-3).abs() < 1e-18);
}

#[test]
fn budget_scales_with_master_constant() {
    let a = contraction_budget(&KatoIndices::reference(), 0.0, 1.0).unwrap();
    let b = contraction_budget(&KatoIndices::reference(), 0.0, 3.0).unwrap();
    assert!((b.c333 - 3.0 * a.c333).abs() < 1e-12 * b.c333);
    assert!((b.eps_max - a.eps_max / 3.0).abs() < 1e-12 * a.eps_max);
}

#[test]
fn budget_flags_beta_pole() {
    // α1 + α2 → 1⁻ puts C112 on the pole of β(·, 1 − α1 − α2)
    let idx = KatoIndices::new(17.0 / 8.0, 3.0, 15.0 / 8.0, 9.0 / 17.0, 1.0 - 9.0 / 17.0 - 1e-14, 7.0 / 15.0);
    let b = contraction_budget_unchecked(&idx, 0.0, 1.0).unwrap();
    assert!(b.divergent.iter().any(|n| n == "C112"), "{:?}", b.divergent);
    assert!(contraction_budget(&with(|k| k.p3 = 2.0), 0.0, 1.0).is_err());
}

#[test]
fn c0_threshold_values() {
    assert_eq!(c0_threshold(4.0), 1.0 / 96.0);
    assert_eq!(c0_threshold(2.0), 1.0 / 96.0);
    assert!((c0_threshold(8.0) - 1.0 / 192.0).abs() < 1e-18);
}

#[test]
fn sweep_finds_only_admissible_sextuples() {
    let found = sweep(12);
    assert!(!found.is_empty());
    for idx in found {
        assert!(validate(&idx).unwrap().pass);
    }
}

proptest! {
    #[test]
    fn beta_symmetric(a in 0.01..20.0f64, b in 0.01..20.0f64) {
        prop_assert_eq!(beta_fn(a, b).unwrap(), beta_fn(b, a).unwrap());
    }

    #[test]
    fn beta_with_one(a in 0.01..50.0f64) {
        prop_assert!((beta_fn(a, 1.0).unwrap() * a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shrinking_alpha3_keeps_a4(t in 0.0..1.0f64) {
        // moving α3 from 7/15 toward the A1 value keeps A4 satisfied
        let a3 = 7.0 / 15.0 * t;
        let r = validate(&with(|k| k.alpha3 = a3)).unwrap();
        prop_assert!(r.group_passes("A4"));
    }
}
