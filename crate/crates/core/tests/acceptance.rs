//! Acceptance run: one PASS/FAIL line per criterion, details indented below.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL but do not fail the
//! process unless `REEB_LAB_STRICT=1` is set.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use reeb_lab::calculus::{Chart, Rule};
use reeb_lab::flow::{integrate, FlowError, IntegrateOptions, Trajectory};
use reeb_lab::geodesics::{cogeodesic_reeb_compare, Metric};
use reeb_lab::par::Execution;
use reeb_lab::sampling::Grid;
use reeb_lab::scenarios::{build_scenario, Scenario};

const KNOWN_RED: &[&str] = &["7"];

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    /// Record one sub-check.
    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }
}

fn scenario(id: &str, kv: &[(&str, f64)]) -> Scenario {
    let ov: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build_scenario(id, &ov).unwrap_or_else(|e| panic!("{id}: {e}"))
}

/// The trajectory up to `t` or up to the point where it left the chart.
fn flow_until_exit(f: &dyn reeb_lab::flow::Field, x0: &[f64], t: f64, tol: f64) -> Trajectory {
    match integrate(f, x0, t, &IntegrateOptions::tol(tol)) {
        Ok(tr) => tr,
        Err(FlowError::DomainExit { trajectory, .. }) => *trajectory,
        Err(e) => panic!("integration failed: {e}"),
    }
}

fn calculus_suite() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let cases = 1000;
    let mut worst = [0.0f64; 4];
    for seed in 0..cases {
        let r = common::calculus_case(seed);
        for k in 0..4 {
            worst[k] = worst[k].max(r[k]);
        }
    }
    let el = start.elapsed();
    o.check(worst[0] <= 1e-10, format!("d∘d = 0: max {:.2e} <= 1e-10 over {cases} cases", worst[0]));
    o.check(worst[1] <= 1e-12, format!("wedge antisymmetry: max {:.2e} <= 1e-12", worst[1]));
    o.check(worst[2] <= 1e-9, format!("pullback commutes with d: max {:.2e} <= 1e-9", worst[2]));
    o.check(worst[3] <= 1e-8, format!("dα(X,Y) = Xα(Y) - Yα(X) - α([X,Y]): max {:.2e} <= 1e-8", worst[3]));
    o.check(el < Duration::from_secs(30), format!("runtime {el:.2?} < 30 s"));
    o
}

/// Quintic smoothstep on [a, b] and its derivative.
fn smoothstep5(a: f64, b: f64, x: f64) -> (f64, f64) {
    let u = ((x - a) / (b - a)).clamp(0.0, 1.0);
    (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u), 30.0 * u * u * (1.0 - u) * (1.0 - u) / (b - a))
}

fn overtwisted_formulas() -> Outcome {
    let mut o = Outcome::new();
    let sc = scenario("ot-r3", &[]);
    let eps = sc.params()["eps"];
    let cs = sc.contact("alpha").unwrap();
    let grid = Grid::uniform(&[0.05, 0.0, -5.0], &[3.0 * PI, 2.0 * PI * 0.9, 5.0], 10);
    let (mut d_err, mut r_err, mut min_ax) = (0.0f64, 0.0f64, f64::INFINITY);
    for p in grid.points() {
        let (r, z) = (p[0], p[2]);
        let (phi, dphi) = smoothstep5(0.02, 0.1, r);
        let f = -eps * z.tanh();
        let df = -eps * (1.0 - z.tanh().powi(2));
        let drth = r.sin() + r * r.cos() + dphi * f;
        // coordinate order (r, θ, z)
        let expected: BTreeMap<Vec<usize>, f64> =
            [(vec![0, 1], drth), (vec![0, 2], -r.sin()), (vec![1, 2], -df * phi)].into_iter().collect();
        let got: BTreeMap<Vec<usize>, f64> = cs.dalpha().eval_coeffs(&p).unwrap().into_iter().collect();
        for (idx, want) in &expected {
            d_err = d_err.max((got.get(idx).copied().unwrap_or(0.0) - want).abs());
        }
        for (idx, v) in &got {
            if !expected.contains_key(idx) {
                d_err = d_err.max(v.abs());
            }
        }
        let x = [-df * phi, r.sin(), drth];
        let alpha = [0.0, r * r.sin() + f * phi, r.cos()];
        let ax: f64 = (0..3).map(|i| alpha[i] * x[i]).sum();
        min_ax = min_ax.min(ax);
        let reeb = cs.reeb_at(&p).unwrap().r;
        for i in 0..3 {
            r_err = r_err.max((reeb[i] - x[i] / ax).abs());
        }
    }
    o.check(d_err <= 1e-10, format!("dα against displayed formula at 1000 points: max {d_err:.2e} <= 1e-10"));
    o.check(min_ax > 0.0, format!("α(X) > 0 on the grid: min {min_ax:.3e}"));
    o.check(r_err <= 1e-9, format!("Reeb = X/α(X): max {r_err:.2e} <= 1e-9"));
    let r0 = sc.contact("alpha_cart").unwrap().reeb_at(&[0.0, 0.0, 0.0]).unwrap().r;
    let e0 = r0[0].abs().max(r0[1].abs()).max((r0[2] - 1.0).abs());
    o.check(e0 <= 1e-6, format!("Reeb at the Cartesian origin = ∂z: {r0:?}, error {e0:.2e}"));
    o
}

fn no_orbit_certificates() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let certify = |o: &mut Outcome, sc: &Scenario, ids: &[&str], strict: bool| {
        for id in ids {
            let spec = sc.certificates().into_iter().find(|c| c.id == *id).unwrap();
            let rep = sc.run_certificate(spec, Execution::default()).unwrap();
            let ok = rep.pass && (!strict || rep.margin > 0.0);
            o.check(ok, format!("{} {id}: W = {}, margin {:.3e}", sc.id(), spec.functional, rep.margin));
        }
    };
    let ot = scenario("ot-r3", &[]);
    certify(&mut o, &ot, &["radius-increasing-outer", "radius-increasing-bridge", "height-core"], true);
    certify(&mut o, &ot, &["radius-nondecreasing"], false);
    let s2 = scenario("s2xr", &[]);
    certify(
        &mut o,
        &s2,
        &["z-increasing-north", "z-increasing-south", "s-decreasing-equator", "s-increasing-north-pole", "s-increasing-south-pole"],
        true,
    );
    certify(&mut o, &s2, &["z-nondecreasing"], false);

    let runs: Vec<(&str, Vec<(&str, f64)>)> = vec![
        ("ot-r3", vec![]),
        ("s2xr", vec![]),
        ("sharp-s2t2", vec![("t", 0.25)]),
        ("sharp-s2t2", vec![("t", 0.5)]),
        ("sharp-s2t2", vec![("t", 1.5)]),
        ("s3-reeb-leaf", vec![("c", 0.0)]),
        ("s3-reeb-leaf", vec![("c", 1.0)]),
        ("t3-linear", vec![]),
    ];
    for (id, kv) in runs {
        let sc = scenario(id, &kv);
        let t = Instant::now();
        let rep = sc.search_orbits(Some(&[6, 6, 6]), Some(200.0), Execution::default()).unwrap();
        o.check(
            rep.orbits.is_empty() && rep.seeds >= 200,
            format!(
                "{id} {kv:?}: {} orbits from {} seeds, T_max 200 ({} left the chart) in {:.2?}",
                rep.orbits.len(),
                rep.seeds,
                rep.exits,
                t.elapsed()
            ),
        );
    }
    let el = start.elapsed();
    o.check(el < Duration::from_secs(600), format!("total runtime {el:.2?} < 10 min"));
    o
}

fn closed_orbits() -> Outcome {
    let mut o = Outcome::new();
    for t in [0.0, 1.0] {
        let sc = scenario("sharp-s2t2", &[("t", t)]);
        let rep = sc.search_orbits(Some(&[6, 6, 6]), Some(100.0), Execution::default()).unwrap();
        let hit = rep
            .orbits
            .iter()
            .find(|c| (c.point[0] - PI).abs() <= 1e-6 && (c.period - 2.0 * PI).abs() <= 1e-6 && c.residual <= 1e-9);
        o.check(
            hit.is_some(),
            match hit {
                Some(c) => format!(
                    "sharp-s2t2 t={t}: z=π orbit, period {:.12} (|ΔT| {:.1e}), residual {:.1e}; {} orbits total",
                    c.period,
                    (c.period - 2.0 * PI).abs(),
                    c.residual,
                    rep.orbits.len()
                ),
                None => format!("sharp-s2t2 t={t}: no z=π orbit among {} found", rep.orbits.len()),
            },
        );
    }
    let sc = scenario("flat-torus-unit-cotangent", &[]);
    let rep = sc.search_orbits(None, None, Execution::default()).unwrap();
    let chart = sc.contact("alpha").unwrap().chart().clone();
    let hit = rep.orbits.iter().find(|c| {
        let dpsi = chart.delta(&[0.0, 0.0, c.point[2]], &[0.0, 0.0, 0.0])[2];
        dpsi.abs() <= 1e-6 && (c.period - 2.0 * PI).abs() <= 1e-8
    });
    o.check(
        hit.is_some(),
        match hit {
            Some(c) => format!(
                "flat torus: (1,0) geodesic through {:?}, period {:.15} (|ΔT| {:.1e})",
                c.point,
                c.period,
                (c.period - 2.0 * PI).abs()
            ),
            None => format!("flat torus: no (1,0) orbit among {}", rep.orbits.len()),
        },
    );
    o
}

fn cogeodesic_lemma() -> Outcome {
    let mut o = Outcome::new();
    let tol = 1e-10;
    let run = |o: &mut Outcome, label: &str, g: &Metric, q: &[f64], psi: f64| {
        let c = cogeodesic_reeb_compare(g, q, psi, 20.0, tol).unwrap();
        o.check(
            c.max_deviation <= 100.0 * tol,
            format!("{label}: max base deviation {:.2e} <= {:.0e} over T = 20", c.max_deviation, 100.0 * tol),
        );
    };
    let plane = Arc::new(Chart::euclidean("plane", &["x", "y"]));
    run(&mut o, "Euclidean plane", &Metric::euclidean(&plane), &[0.3, -0.2], 0.9);
    let t3 = scenario("t3-linear", &[]);
    run(&mut o, "t3-linear leaf", t3.metric("leaf").unwrap(), &[0.1, 0.2], 0.4);
    let ft = scenario("flat-torus-unit-cotangent", &[]);
    run(&mut o, "flat torus", ft.metric("flat").unwrap(), &[1.0, 2.0], 0.3);
    let s3 = scenario("s3-reeb-leaf", &[]);
    run(&mut o, "S³ Reeb leaf", s3.metric("leaf").unwrap(), &[3.0, 0.5], 0.7);
    run(&mut o, "S³ Reeb leaf, arclength", s3.metric("leaf_arclength").unwrap(), &[3.0, 0.5], 0.7);
    o
}

fn lemma_geodesics() -> Outcome {
    let mut o = Outcome::new();
    let sc = scenario("s3-reeb-leaf", &[]);
    let g = sc.metric("lemma").unwrap();
    let field = g.geodesic_field();
    let f = |r: f64| g.entry(1, 1).eval(&[r, 0.0]).unwrap();
    let df = |r: f64| (f(r + 1e-5) - f(r - 1e-5)) / 2e-5;
    let mut rng = common::rng(50);
    let (mut min_rdot, mut clairaut, mut accel) = (f64::INFINITY, 0.0f64, 0.0f64);
    let (mut printed_gap, mut n) = (0.0f64, 0);
    let h = 1e-3;
    for _ in 0..50 {
        let r0 = rng.gen_range(0.2..2.0);
        let th0 = rng.gen_range(0.0..2.0 * PI);
        // heading measured from ∂r; |β| < π/2 gives ṙ(0) > 0, β ≠ 0 keeps it non-radial
        let beta = rng.gen_range(0.05..PI / 2.0 - 0.05) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let speed = 0.5;
        let x0 = [r0, th0, speed * beta.cos(), speed * beta.sin() / f(r0).sqrt()];
        let tr = integrate(&field, &x0, 50.0, &IntegrateOptions::tol(1e-12)).unwrap();
        let l0 = f(r0) * x0[3];
        for i in 0..=1000 {
            let t = 50.0 * i as f64 / 1000.0;
            let y = tr.eval(t);
            if i > 0 {
                min_rdot = min_rdot.min(y[2]);
            }
            clairaut = clairaut.max((f(y[0]) * y[3] - l0).abs());
            if i > 0 && i < 1000 {
                // five-point stencil on ṙ
                let v = |k: f64| tr.eval(t + k * h)[2];
                let rdd = (v(-2.0) - 8.0 * v(-1.0) + 8.0 * v(1.0) - v(2.0)) / (12.0 * h);
                let rhs = 0.5 * df(y[0]) * y[3] * y[3];
                accel = accel.max((rdd - rhs).abs());
                printed_gap = printed_gap.max((rdd - 2.0 * rhs).abs());
                n += 1;
            }
        }
    }
    o.check(min_rdot > 0.0, format!("ṙ > 0 along 50 geodesics with ṙ(0) > 0: min ṙ {min_rdot:.3e}"));
    o.check(clairaut <= 1e-8, format!("Clairaut f·θ̇ drift over T = 50: {clairaut:.2e} <= 1e-8"));
    o.check(accel <= 1e-6, format!("r̈ (five-point difference of ṙ, h = 1e-3) vs (f'/2)θ̇²: max {accel:.2e} <= 1e-6 at {n} samples"));
    o.note(format!("r̈ vs f'θ̇² (no factor 1/2): max gap {printed_gap:.2e}; the 1/2 is required"));
    o
}

fn leaf_metric_data() -> Outcome {
    let mut o = Outcome::new();
    let sc = scenario("s3-reeb-leaf", &[]);
    let g = sc.metric("clifford").unwrap();
    let mut err = 0.0f64;
    for p in Grid::uniform(&[0.0, 0.0], &[2.0 * PI, 2.0 * PI], 16).points() {
        let m = g.eval(&p).unwrap();
        err = err.max((m[(0, 0)] - 0.5).abs()).max((m[(1, 1)] - 0.5).abs()).max(m[(0, 1)].abs());
    }
    o.check(err <= 1e-15, format!("Clifford torus metric = diag(1/2, 1/2): max error {err:.1e} on 16x16 grid"));
    let prof = sc.radial_profile("leaf_arclength").unwrap();
    let sig: Vec<f64> = (0..=800).map(|i| 0.1 * i as f64).collect();
    let h: Vec<f64> = sig.iter().map(|&s| prof.h_tilde(s).unwrap()).collect();
    let mono = h.windows(2).all(|w| w[1] > w[0]);
    o.check(mono, format!("h̃ strictly increasing on σ ∈ [0, 80] step 0.1: h̃(0.1) {:.4e}, h̃(80) {:.6}", h[1], h[800]));
    let h50 = prof.h_tilde(50.0).unwrap();
    o.check(
        (h50 - 0.5).abs() <= 1e-3,
        format!("h̃(50) = {h50:.6}, |h̃ - 1/2| = {:.2e} (needs <= 1e-3)", (h50 - 0.5).abs()),
    );
    let leaf = sc.metric("leaf").unwrap();
    let h2 = leaf.eval(&[50.0, 0.0]).unwrap()[(1, 1)];
    o.note(format!("unreparametrised h2(ρ = 50) = {h2:.6}; ρ(σ = 50) = {:.3}", prof.rho(50.0).unwrap()));
    o
}

fn energy_suite() -> Outcome {
    let mut o = Outcome::new();
    let rule = Rule::default();
    for t in [0.0, 1.0] {
        let sc = scenario("sharp-s2t2", &[("t", t)]);
        let spec = sc.energies().into_iter().find(|e| e.id == "trivial-cylinder").unwrap();
        let e = sc.run_energy(spec, rule).unwrap().value;
        o.check(e.abs() <= 1e-8, format!("trivial cylinder, leaf t={t}: E^h = {e:.2e}"));
    }
    let ot = scenario("ot-r3", &[]);
    let val = |id: &str| {
        let spec = ot.energies().into_iter().find(|e| e.id == id).unwrap();
        ot.run_energy(spec, rule).unwrap().value
    };
    for (disc, lp) in [("disc-pi", "loop-pi"), ("disc-half-pi", "loop-half-pi")] {
        let (a, b) = (val(disc), val(lp));
        o.check((a - b).abs() <= 1e-7, format!("Stokes {disc} vs {lp}: {a:.12} vs {b:.12}, gap {:.2e}", (a - b).abs()));
    }
    let l = val("loop-half-pi");
    o.check((l - PI * PI).abs() <= 1e-9, format!("boundary energy of r = π/2 loop: {l:.15} vs π², gap {:.2e}", (l - PI * PI).abs()));
    o
}

fn integrator_quality() -> Outcome {
    let mut o = Outcome::new();
    let c = Arc::new(Chart::euclidean("phase", &["x", "y"]));
    let osc = reeb_lab::calculus::VectorField::parse(&c, &["-y", "x"]).unwrap();
    let t_end: f64 = 10.0;
    let exact = [t_end.cos(), t_end.sin()];
    let err_at = |h: f64| {
        let opts = IntegrateOptions {
            tol: 1.0,
            h_max: h,
            ..IntegrateOptions::default()
        };
        let y = integrate(&osc, &[1.0, 0.0], t_end, &opts).unwrap().end_state().to_vec();
        (y[0] - exact[0]).hypot(y[1] - exact[1])
    };
    let hs = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<f64> = hs.iter().map(|&h| err_at(h)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    o.check(min_order >= 4.0, format!("harmonic oscillator, step halving: errors {}, observed orders {orders:.2?}", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")));

    let tol = 1e-10;
    let tr = integrate(&osc, &[1.0, 0.0], 100.0, &IntegrateOptions::tol(tol)).unwrap();
    let drift = tr.sample(2000).iter().map(|(_, y)| (y[0] * y[0] + y[1] * y[1] - 1.0).abs()).fold(0.0, f64::max);
    o.check(drift <= 10.0 * tol, format!("harmonic oscillator energy drift over T = 100: {drift:.2e}"));

    let mut rng = common::rng(9);
    for id in ["s3-reeb-leaf", "t3-linear", "flat-torus-unit-cotangent"] {
        let sc = scenario(id, &[]);
        let tol = sc.tolerances().integrate;
        for m in sc.metric_ids() {
            let g = sc.metric(m).unwrap();
            let field = g.geodesic_field();
            let chart = g.chart();
            let (mut worst, mut shortest) = (0.0f64, f64::INFINITY);
            for _ in 0..3 {
                let q: Vec<f64> = chart
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| {
                        let (lo, hi) = (lo.max(-5.0), hi.min(5.0));
                        lo + (hi - lo) * rng.gen_range(0.3..0.7)
                    })
                    .collect();
                let mut v: Vec<f64> = (0..q.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s = g.inner(&q, &v, &v).unwrap().sqrt();
                v.iter_mut().for_each(|x| *x /= s);
                let x0: Vec<f64> = q.iter().chain(&v).copied().collect();
                let tr = flow_until_exit(&field, &x0, 100.0, tol);
                shortest = shortest.min(tr.t_end());
                for (_, y) in tr.sample(2000) {
                    worst = worst.max((field.speed_squared(&y).unwrap() - 1.0).abs());
                }
            }
            let span = if shortest < 100.0 {
                format!("shortest run {shortest:.2} (left the chart)")
            } else {
                "T = 100".into()
            };
            o.check(worst <= 10.0 * tol, format!("{id}/{m}: |g(v,v) - 1| <= {worst:.2e}, {span}"));
        }
    }
    o
}

fn main() {
    let criteria: Vec<(&str, &str, fn() -> Outcome)> = vec![
        ("1", "calculus identities on random data", calculus_suite),
        ("2", "overtwisted R³: dα, kernel field and Reeb", overtwisted_formulas),
        ("3", "no-orbit certificates and empty orbit searches", no_orbit_certificates),
        ("4", "closed-orbit detection", closed_orbits),
        ("5", "Reeb flow of the unit Liouville form vs geodesic flow", cogeodesic_lemma),
        ("6", "geodesics of dr² + f dθ²", lemma_geodesics),
        ("7", "Clifford torus and arclength leaf metric", leaf_metric_data),
        ("8", "energy of trivial cylinders, Stokes, loop energy", energy_suite),
        ("9", "integrator order and conservation", integrator_quality),
    ];
    let strict = std::env::var("REEB_LAB_STRICT").is_ok_and(|v| v == "1");
    let mut fatal = Vec::new();
    let mut red = Vec::new();
    for (id, title, run) in criteria {
        let t = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {id}: {title} ({:.2?})", t.elapsed());
        for d in &out.details {
            println!("        {d}");
        }
        if !out.pass {
            red.push(id);
            if strict || !KNOWN_RED.contains(&id) {
                fatal.push(id);
            }
        }
    }
    println!();
    println!("{} of 9 criteria pass; failing: {red:?}", 9 - red.len());
    if !red.is_empty() && fatal.is_empty() {
        println!("all failures are known-red ({KNOWN_RED:?}); set REEB_LAB_STRICT=1 to make them fatal");
    }
    if !fatal.is_empty() {
        std::process::exit(1);
    }
}
