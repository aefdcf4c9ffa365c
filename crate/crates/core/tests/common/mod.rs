//! Random smooth test data shared by the property suites and the acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reeb_lab::calculus::{Chart, ChartMap, DifferentialForm, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn r3() -> Arc<Chart> {
    Arc::new(Chart::euclidean("r3", &["x", "y", "z"]))
}

/// A random smooth expression in x, y, z, bounded on the unit cube.
pub fn expr(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => "x".into(),
            1 => "y".into(),
            2 => "z".into(),
            _ => format!("{:?}", (rng.gen_range(-2.0..2.0f64) * 8.0).round() / 8.0),
        };
    }
    let a = expr(rng, depth - 1);
    match rng.gen_range(0..8) {
        0 => format!("sin({a})"),
        1 => format!("cos({a})"),
        2 => format!("tanh({a})"),
        3 => format!("({a})^2"),
        4 => format!("exp(0.5*sin({a}))"),
        5 => format!("({a}) + ({})", expr(rng, depth - 1)),
        6 => format!("({a}) - ({})", expr(rng, depth - 1)),
        _ => format!("({a})*({})", expr(rng, depth - 1)),
    }
}

pub fn point(rng: &mut impl Rng) -> Vec<f64> {
    (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn function(c: &Arc<Chart>, rng: &mut impl Rng) -> DifferentialForm {
    DifferentialForm::function(c, c.parse(&expr(rng, 3)).unwrap()).unwrap()
}

pub fn one_form(c: &Arc<Chart>, rng: &mut impl Rng) -> DifferentialForm {
    let coeffs = (0..3).map(|_| c.parse(&expr(rng, 3)).unwrap()).collect();
    DifferentialForm::one_form(c, coeffs).unwrap()
}

pub fn two_form(c: &Arc<Chart>, rng: &mut impl Rng) -> DifferentialForm {
    let a = one_form(c, rng);
    let b = one_form(c, rng);
    a.wedge(&b).unwrap().add(&one_form(c, rng).d()).unwrap()
}

pub fn vector_field(c: &Arc<Chart>, rng: &mut impl Rng) -> VectorField {
    let comps: Vec<String> = (0..3).map(|_| expr(rng, 2)).collect();
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    VectorField::parse(c, &refs).unwrap()
}

pub fn map(c: &Arc<Chart>, rng: &mut impl Rng) -> ChartMap {
    let comps: Vec<String> = (0..3).map(|_| expr(rng, 2)).collect();
    let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
    ChartMap::parse(c, c, &refs).unwrap()
}

/// Largest coefficient of `a - b` at `x`.
pub fn form_gap(a: &DifferentialForm, b: &DifferentialForm, x: &[f64]) -> f64 {
    a.add(&b.times(&a.chart().constant(-1.0)))
        .unwrap()
        .max_abs_at(x)
        .unwrap()
}

/// The four calculus identities at one random case; returns the residuals
/// `(d∘d, wedge antisymmetry, pullback naturality, Cartan pairing)`.
pub fn calculus_case(seed: u64) -> [f64; 4] {
    let c = r3();
    let mut g = rng(seed);
    let x = point(&mut g);

    let f = function(&c, &mut g);
    let a = one_form(&c, &mut g);
    let w = two_form(&c, &mut g);
    let dd = [f.d().d().max_abs_at(&x).unwrap(), a.d().d().max_abs_at(&x).unwrap()]
        .into_iter()
        .fold(0.0, f64::max);

    let b = one_form(&c, &mut g);
    let anti = [
        form_gap(&a.wedge(&b).unwrap(), &b.wedge(&a).unwrap().times(&c.constant(-1.0)), &x),
        form_gap(&a.wedge(&w).unwrap(), &w.wedge(&a).unwrap(), &x),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let m = map(&c, &mut g);
    let nat = [
        form_gap(&f.d().pullback(&m).unwrap(), &f.pullback(&m).unwrap().d(), &x),
        form_gap(&a.d().pullback(&m).unwrap(), &a.pullback(&m).unwrap().d(), &x),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let xf = vector_field(&c, &mut g);
    let yf = vector_field(&c, &mut g);
    let xv = xf.eval(&x).unwrap();
    let yv = yf.eval(&x).unwrap();
    let lhs = a.d().eval_on(&x, &[&xv, &yv]).unwrap();
    let ay = a.interior(&yf).unwrap();
    let ax = a.interior(&xf).unwrap();
    let coeff0 = |f: &DifferentialForm| f.coeff(&[]).cloned().unwrap_or_else(|| c.constant(0.0));
    let br = xf.bracket_at(&yf, &x).unwrap();
    let rhs = xf.apply(&coeff0(&ay), &x).unwrap() - yf.apply(&coeff0(&ax), &x).unwrap()
        - a.eval_on(&x, &[&br]).unwrap();
    [dd, anti, nat, (lhs - rhs).abs()]
}
