mod common;

use proptest::prelude::*;
use reeb_lab::calculus::DifferentialForm;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exterior_calculus_identities(seed in any::<u64>()) {
        let [dd, anti, nat, cartan] = common::calculus_case(seed);
        prop_assert!(dd <= 1e-10, "d∘d residual {dd}");
        prop_assert!(anti <= 1e-12, "wedge antisymmetry residual {anti}");
        prop_assert!(nat <= 1e-9, "pullback/d residual {nat}");
        prop_assert!(cartan <= 1e-8, "Cartan residual {cartan}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn leibniz_rule(seed in any::<u64>()) {
        let c = common::r3();
        let mut g = common::rng(seed);
        let x = common::point(&mut g);
        let a = common::one_form(&c, &mut g);
        let b = common::one_form(&c, &mut g);
        let lhs = a.wedge(&b).unwrap().d();
        let rhs = a.d().wedge(&b).unwrap().add(&a.wedge(&b.d()).unwrap().times(&c.constant(-1.0))).unwrap();
        prop_assert!(common::form_gap(&lhs, &rhs, &x) <= 1e-10);
    }

    #[test]
    fn pullback_respects_wedge(seed in any::<u64>()) {
        let c = common::r3();
        let mut g = common::rng(seed);
        let x = common::point(&mut g);
        let a = common::one_form(&c, &mut g);
        let b = common::one_form(&c, &mut g);
        let m = common::map(&c, &mut g);
        let lhs = a.wedge(&b).unwrap().pullback(&m).unwrap();
        let rhs = a.pullback(&m).unwrap().wedge(&b.pullback(&m).unwrap()).unwrap();
        prop_assert!(common::form_gap(&lhs, &rhs, &x) <= 1e-9);
    }

    #[test]
    fn pointwise_d_agrees_with_symbolic(seed in any::<u64>()) {
        let c = common::r3();
        let mut g = common::rng(seed);
        let x = common::point(&mut g);
        let a = common::one_form(&c, &mut g);
        let sym: Vec<_> = a.d().eval_coeffs(&x).unwrap();
        let pt = a.d_at(&x).unwrap();
        for (idx, v) in sym {
            let w = pt.get(&idx).copied().unwrap_or(0.0);
            prop_assert!((v - w).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn basis_wedge_sign(i in 0usize..3, j in 0usize..3) {
        let c = common::r3();
        let a = DifferentialForm::basis(&c, &[i]).unwrap();
        let b = DifferentialForm::basis(&c, &[j]).unwrap();
        let w = a.wedge(&b).unwrap();
        let x = [0.1, 0.2, 0.3];
        if i == j {
            prop_assert_eq!(w.max_abs_at(&x).unwrap(), 0.0);
        } else {
            let mut e = [[0.0; 3]; 2];
            e[0][i] = 1.0;
            e[1][j] = 1.0;
            prop_assert_eq!(w.eval_on(&x, &[&e[0], &e[1]]).unwrap(), 1.0);
        }
    }
}
