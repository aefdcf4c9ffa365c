//! Grid-seeded shooting search for closed orbits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::Chart;
use crate::par::{self, Execution};

use super::integrator::{integrate, integrate_with_events, IntegrateOptions};
use super::section::{EventSpec, Section};
use super::{Field, FlowError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSearch {
    pub t_max: f64,
    /// Near-return distance that triggers Newton refinement.
    pub capture_radius: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dedup_radius: f64,
    /// Tolerance of the scanning integration.
    pub scan_tol: f64,
    /// Tolerance of the integrations inside Newton.
    pub refine_tol: f64,
    /// Near-returns examined per seed, in time order.
    pub max_candidates: usize,
    pub floquet: bool,
    pub exec: Execution,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        OrbitSearch {
            t_max: 200.0,
            capture_radius: 1e-2,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            dedup_radius: 1e-4,
            scan_tol: 1e-9,
            refine_tol: 1e-12,
            max_candidates: 3,
            floquet: false,
            exec: Execution::default(),
        }
    }
}

impl OrbitSearch {
    pub fn t_min(&self) -> f64 {
        1e-3 * self.t_max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedOrbit {
    pub point: Vec<f64>,
    pub period: f64,
    /// `|Φ_T(x) - x|`, periodic coordinates measured the short way.
    pub residual: f64,
    /// Eigenvalues of the monodromy matrix as `(re, im)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floquet: Option<Vec<(f64, f64)>>,
    pub seed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearchReport {
    pub orbits: Vec<ClosedOrbit>,
    pub seeds: usize,
    pub near_returns: usize,
    pub newton_failures: usize,
    /// Seeds whose scan left the chart before `t_max`.
    pub exits: usize,
    /// Seeds the field could not be evaluated at, or with vanishing field.
    pub skipped: usize,
}

enum SeedOutcome {
    Skipped,
    Scanned {
        exited: bool,
        near: usize,
        failures: usize,
        found: Vec<(ClosedOrbit, Vec<Vec<f64>>)>,
    },
}

/// Run the search from every seed; results are merged in seed order, so the
/// report is identical in parallel and sequential mode.
pub fn find_closed_orbits<F: Field + ?Sized>(
    f: &F,
    seeds: &[Vec<f64>],
    opts: &OrbitSearch,
) -> OrbitSearchReport {
    let outcomes = par::map_range(opts.exec, seeds.len(), |i| search_seed(f, i, &seeds[i], opts));
    let chart = f.chart();
    let mut rep = OrbitSearchReport {
        seeds: seeds.len(),
        ..Default::default()
    };
    let mut kept: Vec<(ClosedOrbit, Vec<Vec<f64>>)> = Vec::new();
    for o in outcomes {
        match o {
            SeedOutcome::Skipped => rep.skipped += 1,
            SeedOutcome::Scanned {
                exited,
                near,
                failures,
                found,
            } => {
                rep.exits += exited as usize;
                rep.near_returns += near;
                rep.newton_failures += failures;
                for (orb, poly) in found {
                    match kept
                        .iter_mut()
                        .find(|(_, p)| hausdorff(chart, p, &poly) < opts.dedup_radius)
                    {
                        Some(existing) => {
                            if orb.period < existing.0.period * (1.0 - 1e-9) {
                                *existing = (orb, poly);
                            }
                        }
                        None => kept.push((orb, poly)),
                    }
                }
            }
        }
    }
    let mut orbits: Vec<ClosedOrbit> = kept.into_iter().map(|(o, _)| o).collect();
    orbits.sort_by(|a, b| {
        a.period
            .total_cmp(&b.period)
            .then_with(|| cmp_lex(&a.point, &b.point))
    });
    rep.orbits = orbits;
    rep
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c.is_ne() {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

fn search_seed<F: Field + ?Sized>(f: &F, idx: usize, x0: &[f64], opts: &OrbitSearch) -> SeedOutcome {
    let chart = f.chart();
    if !chart.contains(x0) {
        return SeedOutcome::Skipped;
    }
    let Ok(v) = f.at(x0) else {
        return SeedOutcome::Skipped;
    };
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return SeedOutcome::Skipped;
    }
    let normal: Vec<f64> = v.iter().map(|a| a / norm).collect();
    let ev = EventSpec {
        min_rate: 1e-9,
        ..EventSpec::new(
            Section::Hyperplane {
                origin: x0.to_vec(),
                normal: normal.clone(),
            },
            1,
        )
    };
    let scan = integrate_with_events(
        f,
        x0,
        opts.t_max,
        &IntegrateOptions::tol(opts.scan_tol),
        std::slice::from_ref(&ev),
    );
    let (traj, exited) = match scan {
        Ok(t) => (t, false),
        Err(FlowError::DomainExit { trajectory, .. })
        | Err(FlowError::StepUnderflow { trajectory, .. })
        | Err(FlowError::MaxSteps { trajectory }) => (*trajectory, true),
        Err(FlowError::InvalidStart { .. }) => return SeedOutcome::Skipped,
    };
    let candidates: Vec<f64> = traj
        .events
        .iter()
        .filter(|e| e.t >= opts.t_min() && chart.distance(x0, &e.state) < opts.capture_radius)
        .map(|e| e.t)
        .take(opts.max_candidates)
        .collect();
    let near = candidates.len();
    let mut failures = 0;
    let mut found = Vec::new();
    let basis = complement_basis(&normal);
    for t_guess in candidates {
        match refine(f, x0, &basis, t_guess, opts) {
            Some((p, t, res)) if t >= opts.t_min() && t <= opts.t_max && res <= opts.newton_tol.max(1e-9) => {
                let poly = polyline(f, &p, t, opts.refine_tol);
                let floquet = if opts.floquet { monodromy_eigen(f, &p, t, opts) } else { None };
                found.push((
                    ClosedOrbit {
                        point: p,
                        period: t,
                        residual: res,
                        floquet,
                        seed: idx,
                    },
                    poly,
                ));
                break;
            }
            _ => {
                log::debug!("seed {idx}: Newton refinement from T = {t_guess} failed");
                failures += 1;
            }
        }
    }
    SeedOutcome::Scanned {
        exited,
        near,
        failures,
        found,
    }
}

/// Orthonormal basis of the complement of a unit vector (Gram–Schmidt on the
/// coordinate axes, skipping the most aligned one).
fn complement_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let skip = (0..d)
        .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .expect("nonempty");
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in (0..d).filter(|&i| i != skip) {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for b in std::iter::once(n).chain(out.iter().map(|v| v.as_slice())) {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        out.push(v.iter().map(|a| a / nv).collect());
    }
    out
}

fn flow_to<F: Field + ?Sized>(f: &F, x: &[f64], t: f64, tol: f64) -> Option<Vec<f64>> {
    integrate(f, x, t, &IntegrateOptions::tol(tol))
        .ok()
        .map(|tr| tr.end_state().to_vec())
}

fn residual<F: Field + ?Sized>(f: &F, x: &[f64], t: f64, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let end = flow_to(f, x, t, tol)?;
    Some((f.chart().delta(x, &end), end))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Gauss–Newton on `(u, T) ↦ Φ_T(x₀ + Bu) - (x₀ + Bu)` with a truncated-SVD
/// least-squares step, which tolerates families of orbits.
fn refine<F: Field + ?Sized>(
    f: &F,
    x0: &[f64],
    basis: &[Vec<f64>],
    t0: f64,
    opts: &OrbitSearch,
) -> Option<(Vec<f64>, f64, f64)> {
    let chart = f.chart();
    let n = x0.len();
    let m = basis.len();
    let tol = opts.refine_tol;
    let point = |u: &[f64]| -> Vec<f64> {
        let mut p = x0.to_vec();
        for (k, b) in basis.iter().enumerate() {
            for i in 0..n {
                p[i] += u[k] * b[i];
            }
        }
        chart_wrap(chart, p)
    };
    let mut u = vec![0.0; m];
    let mut t = t0;
    let mut x = point(&u);
    let (mut g, mut end) = residual(f, &x, t, tol)?;
    let mut gn = norm(&g);
    for _ in 0..opts.newton_max_iter {
        if gn <= opts.newton_tol {
            return Some((x, t, gn));
        }
        let mut jac = DMatrix::<f64>::zeros(n, m + 1);
        let delta = 1e-7;
        for k in 0..m {
            let mut up = u.clone();
            up[k] += delta;
            let mut um = u.clone();
            um[k] -= delta;
            let (gp, _) = residual(f, &point(&up), t, tol)?;
            let (gm, _) = residual(f, &point(&um), t, tol)?;
            for i in 0..n {
                jac[(i, k)] = (gp[i] - gm[i]) / (2.0 * delta);
            }
        }
        let xt = f.at(&end).ok()?;
        for i in 0..n {
            jac[(i, m)] = xt[i];
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let rhs = DVector::from_iterator(n, g.iter().map(|v| -v));
        let step = svd.solve(&rhs, 1e-8 * smax).ok()?;
        // Damped update.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let un: Vec<f64> = (0..m).map(|k| u[k] + lambda * step[k]).collect();
            let tn = t + lambda * step[m];
            if tn <= 0.0 {
                lambda *= 0.5;
                continue;
            }
            let xn = point(&un);
            if let Some((gn2, end2)) = residual(f, &xn, tn, tol) {
                let nn = norm(&gn2);
                if nn < gn {
                    u = un;
                    t = tn;
                    x = xn;
                    g = gn2;
                    end = end2;
                    gn = nn;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (gn <= opts.newton_tol).then_some((x, t, gn))
}

fn chart_wrap(chart: &Chart, mut p: Vec<f64>) -> Vec<f64> {
    chart.wrap(&mut p);
    p
}

fn polyline<F: Field + ?Sized>(f: &F, x: &[f64], t: f64, tol: f64) -> Vec<Vec<f64>> {
    match integrate(f, x, t, &IntegrateOptions::tol(tol)) {
        Ok(tr) => tr.sample(256).into_iter().map(|(_, y)| y).collect(),
        Err(_) => vec![x.to_vec()],
    }
}

fn point_to_polyline(chart: &Chart, a: &[f64], poly: &[Vec<f64>]) -> f64 {
    if poly.len() == 1 {
        return chart.distance(&poly[0], a);
    }
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        let d = chart.delta(&w[0], a);
        let e = chart.delta(&w[0], &w[1]);
        let ee: f64 = e.iter().map(|v| v * v).sum();
        let s = if ee > 0.0 {
            (d.iter().zip(&e).map(|(x, y)| x * y).sum::<f64>() / ee).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = d
            .iter()
            .zip(&e)
            .map(|(x, y)| (x - s * y).powi(2))
            .sum::<f64>()
            .sqrt();
        best = best.min(dist);
    }
    best
}

/// Symmetric Hausdorff distance between two sampled orbits.
pub(crate) fn hausdorff(chart: &Chart, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let ab = a.iter().map(|p| point_to_polyline(chart, p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|p| point_to_polyline(chart, p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

fn monodromy_eigen<F: Field + ?Sized>(f: &F, x: &[f64], t: f64, opts: &OrbitSearch) -> Option<Vec<(f64, f64)>> {
    let n = x.len();
    let chart = f.chart();
    let base = flow_to(f, x, t, opts.refine_tol)?;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let h = 1e-6;
    for j in 0..n {
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let ep = flow_to(f, &xp, t, opts.refine_tol)?;
        let em = flow_to(f, &xm, t, opts.refine_tol)?;
        let d = chart.delta(&em, &ep);
        let _ = &base;
        for i in 0..n {
            m[(i, j)] = d[i] / (2.0 * h);
        }
    }
    let ev = m.complex_eigenvalues();
    let mut out: Vec<(f64, f64)> = ev.iter().map(|c| (c.re, c.im)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorField;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn finds_oscillator_orbit_once() {
        let c = Arc::new(Chart::new("plane", &["x", "y"], &[(-3.0, 3.0), (-3.0, 3.0)]).unwrap());
        let x = VectorField::parse(&c, &["-y", "x"]).unwrap();
        let seeds = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let opts = OrbitSearch {
            t_max: 10.0,
            floquet: true,
            ..Default::default()
        };
        let rep = find_closed_orbits(&x, &seeds, &opts);
        // Each seed lies on a different circle point but all three circles coincide.
        assert_eq!(rep.orbits.len(), 1, "{rep:?}");
        let o = &rep.orbits[0];
        assert!((o.period - 2.0 * PI).abs() < 1e-8);
        let fl = o.floquet.as_ref().unwrap();
        assert!(fl.iter().all(|(re, im)| (re - 1.0).abs() < 1e-5 && im.abs() < 1e-5));
    }

    #[test]
    fn no_orbit_for_translation() {
        let c = Arc::new(Chart::new("strip", &["x", "y"], &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap());
        let x = VectorField::parse(&c, &["1", "0.1"]).unwrap();
        let rep = find_closed_orbits(&x, &[vec![0.0, 0.0]], &OrbitSearch::default());
        assert!(rep.orbits.is_empty());
        assert_eq!(rep.exits, 1);
    }

    #[test]
    fn complement_is_orthonormal() {
        let n = [0.6, 0.0, 0.8];
        let b = complement_basis(&n);
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!((norm(v) - 1.0).abs() < 1e-14);
            assert!(v.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-14);
        }
    }
}
