mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use reeb_lab::calculus::{Chart, VectorField};
use reeb_lab::flow::{certify_monotone, find_closed_orbits, integrate, IntegrateOptions, OrbitSearch};
use reeb_lab::par::Execution;
use reeb_lab::sampling::Grid;
use reeb_lab::scenarios::build_scenario;

fn pendulum() -> VectorField {
    let c = Arc::new(Chart::euclidean("phase", &["q", "p"]));
    VectorField::parse(&c, &["p", "-sin(q)"]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_flow_undoes_forward_flow(q in -2.0f64..2.0, p in -1.0f64..1.0, t in 0.5f64..10.0) {
        let f = pendulum();
        let opts = IntegrateOptions::tol(1e-11);
        let fwd = integrate(&f, &[q, p], t, &opts).unwrap();
        let back = integrate(&f, fwd.end_state(), -t, &opts).unwrap();
        let e = back.end_state();
        prop_assert!((e[0] - q).abs().max((e[1] - p).abs()) <= 1e-8);
    }

    #[test]
    fn pendulum_energy_is_conserved(q in -2.0f64..2.0, p in -1.0f64..1.0) {
        let f = pendulum();
        let tol = 1e-10;
        let tr = integrate(&f, &[q, p], 100.0, &IntegrateOptions::tol(tol)).unwrap();
        let h = |y: &[f64]| 0.5 * y[1] * y[1] - y[0].cos();
        let h0 = h(&[q, p]);
        for (_, y) in tr.sample(500) {
            prop_assert!((h(&y) - h0).abs() <= 10.0 * tol);
        }
    }

    #[test]
    fn dense_output_matches_shorter_integration(q in -2.0f64..2.0, p in -1.0f64..1.0, s in 0.1f64..0.9) {
        let f = pendulum();
        let opts = IntegrateOptions::tol(1e-11);
        let long = integrate(&f, &[q, p], 5.0, &opts).unwrap();
        let short = integrate(&f, &[q, p], 5.0 * s, &opts).unwrap();
        let (a, b) = (long.eval(5.0 * s), short.end_state().to_vec());
        prop_assert!((a[0] - b[0]).abs().max((a[1] - b[1]).abs()) <= 1e-8);
    }

    #[test]
    fn reeb_field_normalised_and_in_kernel(r in 0.05f64..9.0, th in 0.0f64..6.28, z in -5.0f64..5.0) {
        let sc = build_scenario("ot-r3", &BTreeMap::new()).unwrap();
        let s = sc.contact("alpha").unwrap().reeb_at(&[r, th, z]).unwrap();
        prop_assert!(s.alpha_residual <= 1e-9);
        prop_assert!(s.kernel_residual <= 1e-9);
    }

    #[test]
    fn geodesic_speed_is_conserved(r in 0.3f64..3.0, th in 0.0f64..6.28, a in -1.0f64..1.0) {
        let sc = build_scenario("s3-reeb-leaf", &BTreeMap::new()).unwrap();
        let g = sc.metric("leaf").unwrap();
        let field = g.geodesic_field();
        let x0 = [r, th, a, 0.2];
        let tol = 1e-10;
        let e0 = field.speed_squared(&x0).unwrap();
        let tr = match integrate(&field, &x0, 30.0, &IntegrateOptions::tol(tol)) {
            Ok(t) => t,
            Err(e) => e.trajectory().cloned().unwrap(),
        };
        for (_, y) in tr.sample(300) {
            prop_assert!((field.speed_squared(&y).unwrap() - e0).abs() <= 10.0 * tol * e0.max(1.0));
        }
    }
}

#[test]
fn convergence_order_from_step_halving() {
    let c = Arc::new(Chart::euclidean("phase", &["x", "y"]));
    let f = VectorField::parse(&c, &["-y", "x"]).unwrap();
    let err = |h: f64| {
        let opts = IntegrateOptions { tol: 1.0, h_max: h, ..IntegrateOptions::default() };
        let y = integrate(&f, &[1.0, 0.0], 10.0, &opts).unwrap().end_state().to_vec();
        (y[0] - 10f64.cos()).hypot(y[1] - 10f64.sin())
    };
    let (e1, e2) = (err(0.1), err(0.05));
    assert!((e1 / e2).log2() >= 4.0, "{e1:e} {e2:e}");
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let sc = build_scenario("flat-torus-unit-cotangent", &BTreeMap::new()).unwrap();
    let a = sc.search_orbits(Some(&[3, 3, 4]), Some(20.0), Execution::Parallel).unwrap();
    let b = sc.search_orbits(Some(&[3, 3, 4]), Some(20.0), Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert!(!a.orbits.is_empty());

    let c = Arc::new(Chart::euclidean("r3", &["x", "y", "z"]));
    let f = VectorField::parse(&c, &["sin(y)", "cos(x)", "1"]).unwrap();
    let g = Grid::uniform(&[-1.0; 3], &[1.0; 3], 12);
    let w = c.parse("z").unwrap();
    let p = certify_monotone(&f, &w, &g, 0.5, Execution::Parallel).unwrap();
    let s = certify_monotone(&f, &w, &g, 0.5, Execution::Sequential).unwrap();
    assert_eq!(p, s);
    let _ = find_closed_orbits(&f, &[], &OrbitSearch::default());
}
