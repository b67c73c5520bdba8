use elliptic_lab::nonlinearity::{cantor_intervals, compute_zf, zero_set, TOL_BIG_F, TOL_F};
use elliptic_lab::trace::TraceSpec;
use elliptic_lab::Nonlinearity;
use proptest::prelude::*;

fn builtin(k: usize) -> Nonlinearity {
    match k {
        0 => Nonlinearity::logistic(),
        1 => Nonlinearity::abs_sin(),
        2 => Nonlinearity::linear_decay(),
        _ => Nonlinearity::cantor(3).unwrap(),
    }
}

/// Composite Simpson on `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h)).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn antiderivative_differences_match_simpson(k in 0usize..4, a in 0.0f64..0.9, len in 0.0f64..0.1) {
        let nl = builtin(k);
        let b = a + len;
        let exact = nl.primitive(b).unwrap() - nl.primitive(a).unwrap();
        let approx = simpson(|s| nl.value(s), a, b, 2000);
        prop_assert!((exact - approx).abs() < 1e-9, "F({b}) - F({a}) = {exact}, Simpson {approx}");
        prop_assert!((nl.integral(a, b).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn zf_points_are_zeros_of_f(level in 1u32..5, cap in 1.0f64..1.2) {
        let nl = Nonlinearity::cantor(level).unwrap().with_s_max(cap).unwrap();
        let e = zero_set(&nl, TOL_F, 20_000).unwrap();
        let zf = compute_zf(&nl, TOL_F, TOL_BIG_F, 20_000).unwrap();
        for &z in &zf.points {
            prop_assert!(nl.value(z).abs() <= TOL_F);
            prop_assert!(e.contains(z, 1e-9), "z = {z} not in E");
        }
        prop_assert_eq!(zf.points.len(), cantor_intervals(level).len());
    }

    #[test]
    fn reflection_mirrors_f(k in 0usize..3, m_prime in 0.5f64..3.0, frac in 0.0f64..1.0, t in 0.0f64..1.0) {
        let nl = builtin(k);
        let m = frac * m_prime;
        let g = nl.reflect(m_prime, m).unwrap();
        let edge = m_prime + 1.0 - m;
        let s = t * edge;
        prop_assert!((g.value(s) + nl.value(m_prime + 1.0 - s)).abs() < 1e-12);
        prop_assert!((g.value(edge + 0.5) + nl.value(m)).abs() < 1e-12);
    }

    #[test]
    fn bump_traces_round_trip(c in -5.0f64..40.0, w in 0.1f64..10.0, ht in 0.0f64..5.0) {
        let t = TraceSpec::Bump { center: c, width: w, height: ht };
        let back: TraceSpec = t.to_string().parse().unwrap();
        prop_assert_eq!(&back, &t);
        let v = t.sample(40, 0.25, &Nonlinearity::logistic()).unwrap();
        prop_assert!(v.iter().all(|&x| (0.0..=ht).contains(&x)));
    }
}
