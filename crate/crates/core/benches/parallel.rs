use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use reeb_lab::par::Execution;
use reeb_lab::scenarios::build_scenario;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn certificate(c: &mut Criterion) {
    let sc = build_scenario("ot-r3", &BTreeMap::new()).unwrap();
    let spec = sc
        .certificates()
        .into_iter()
        .find(|s| s.id == "radius-increasing-outer")
        .unwrap()
        .clone();
    let mut g = c.benchmark_group("certificate ot-r3 40x40x40");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sc.run_certificate(&spec, exec).unwrap())
        });
    }
    g.finish();
}

fn orbit_search(c: &mut Criterion) {
    let sc = build_scenario("flat-torus-unit-cotangent", &BTreeMap::new()).unwrap();
    let mut g = c.benchmark_group("orbit search flat torus 3x3x4");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sc.search_orbits(Some(&[3, 3, 4]), Some(20.0), exec).unwrap())
        });
    }
    g.finish();
}

fn contact_check(c: &mut Criterion) {
    let sc = build_scenario("s2xr", &BTreeMap::new()).unwrap();
    let mut g = c.benchmark_group("verify-contact s2xr");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sc.verify_contact("alpha", None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, certificate, orbit_search, contact_check);
criterion_main!(benches);
