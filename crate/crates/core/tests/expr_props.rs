mod common;

use proptest::prelude::*;
use reeb_lab::expr::Expression;

const XYZ: &[&str] = &["x", "y", "z"];

fn case(seed: u64) -> (Expression, Vec<f64>) {
    let mut g = common::rng(seed);
    let src = common::expr(&mut g, 4);
    (Expression::parse(&src, XYZ).unwrap(), common::point(&mut g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let (e, x) = case(seed);
        let g = e.gradient(&x).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "{e}: ∂{i} {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn symbolic_partial_matches_gradient(seed in any::<u64>()) {
        let (e, x) = case(seed);
        let g = e.gradient(&x).unwrap();
        for i in 0..3 {
            let p = e.partial(i).eval(&x).unwrap();
            prop_assert!((p - g[i]).abs() <= 1e-12 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn partial_is_linear(seed in any::<u64>(), c in -3.0f64..3.0) {
        let (f, x) = case(seed);
        let (g, _) = case(seed.wrapping_add(1));
        let lhs = f.scale(c).add(&g).partial(1).eval(&x).unwrap();
        let rhs = c * f.partial(1).eval(&x).unwrap() + g.partial(1).eval(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn evaluation_is_pure(seed in any::<u64>()) {
        let (e, x) = case(seed);
        let a = e.eval(&x).unwrap();
        let _ = e.gradient(&x).unwrap();
        prop_assert_eq!(a.to_bits(), e.eval(&x).unwrap().to_bits());
    }

    #[test]
    fn printed_form_parses_back(seed in any::<u64>()) {
        let (e, x) = case(seed);
        let back = Expression::parse(&e.to_string(), XYZ).unwrap();
        let (a, b) = (e.eval(&x).unwrap(), back.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()), "{e}");
    }
}
