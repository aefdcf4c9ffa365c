//! Dormand–Prince 5(4) with PI step control and the standard quartic
//! continuous extension.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calculus::Chart;

use super::section::{EventSpec, Located};
use super::{Field, FieldError, FlowError};

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// The controller aims the local error estimate at this fraction of `tol`,
/// so that drift accumulated over long runs stays within a few `tol`.
const LOCAL_FRACTION: f64 = 1e-3;

const BETA: f64 = 0.04;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    /// Used as both relative and absolute local error tolerance.
    pub tol: f64,
    pub max_steps: usize,
    /// Largest admissible step magnitude.
    pub h_max: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-10,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl IntegrateOptions {
    pub fn tol(tol: f64) -> Self {
        IntegrateOptions {
            tol,
            ..Self::default()
        }
    }
}

/// One accepted step with its continuous extension. States inside the step
/// are unwrapped relative to `y0`; periodic wrapping happens on read.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// Scaled local error estimate (accepted steps have `err <= 1`).
    pub err: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    /// Unwrapped state at `t0 + θh`.
    pub fn at_theta(&self, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + t1 * (self.r[2][i] + theta * (self.r[3][i] + t1 * self.r[4][i])));
        }
    }

    pub fn y0(&self) -> &[f64] {
        &self.r[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Index into the event list passed to the integrator.
    pub which: usize,
    pub t: f64,
    pub state: Vec<f64>,
    /// `+1` or `-1`: direction the event function crossed zero.
    pub sign: i8,
    /// Rate of change of the event function at the crossing.
    pub rate: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub field: String,
    pub x0: Vec<f64>,
    /// Node times (monotone in the direction of integration).
    pub times: Vec<f64>,
    /// Node states, periodic coordinates wrapped.
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<DenseStep>,
    pub events: Vec<Event>,
    chart: Chart,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().expect("nonempty")
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    fn step_index(&self, t: f64) -> usize {
        let fwd = self.t_end() >= self.t0();
        let k = self.times.partition_point(|&s| if fwd { s <= t } else { s >= t });
        k.saturating_sub(1).min(self.steps.len().saturating_sub(1))
    }

    /// Dense state at time `t` (clamped to the integrated span), wrapped.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut y = vec![0.0; self.x0.len()];
        if self.steps.is_empty() {
            y.copy_from_slice(&self.states[0]);
            return y;
        }
        let k = self.step_index(t);
        let s = &self.steps[k];
        let theta = ((t - s.t0) / s.h).clamp(0.0, 1.0);
        s.at_theta(theta, &mut y);
        self.chart.wrap(&mut y);
        y
    }

    /// `n + 1` dense samples evenly spaced over the span, as `(t, state)`.
    pub fn sample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.t0(), self.t_end());
        (0..=n)
            .map(|i| {
                let t = if i == n { b } else { a + (b - a) * i as f64 / n as f64 };
                (t, self.eval(t))
            })
            .collect()
    }

    /// RFC-4180 CSV with header `t,<coords…>`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W, samples: Option<usize>) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.chart.coords().iter().cloned());
        out.write_record(&header)?;
        let rows: Vec<(f64, Vec<f64>)> = match samples {
            Some(n) => self.sample(n),
            None => self.times.iter().copied().zip(self.states.iter().cloned()).collect(),
        };
        for (t, y) in rows {
            let mut rec = vec![fmt17(t)];
            rec.extend(y.iter().map(|v| fmt17(*v)));
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

/// Shortest round-trip-safe rendering with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Work {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    y1: Vec<f64>,
}

fn norm_scaled(v: &[f64], y: &[f64], tol: f64) -> f64 {
    let n = v.len() as f64;
    (v.iter()
        .zip(y)
        .map(|(a, b)| {
            let s = tol + tol * b.abs();
            (a / s) * (a / s)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

fn initial_step<F: Field + ?Sized>(
    f: &F,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    tol: f64,
    h_max: f64,
) -> f64 {
    let d0 = norm_scaled(y0, y0, tol);
    let d1 = norm_scaled(f0, y0, tol);
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h * k).collect();
    let mut f1 = vec![0.0; y0.len()];
    if f.eval(&y1, &mut f1).is_err() {
        return h * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm_scaled(&diff, y0, tol) / h;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

enum StepFailure {
    Eval(FieldError, Vec<f64>),
}

fn try_step<F: Field + ?Sized>(
    f: &F,
    y: &[f64],
    h: f64,
    w: &mut Work,
) -> Result<f64, StepFailure> {
    let n = y.len();
    // k[0] holds f(y) on entry (FSAL).
    let stages: [(&[f64], usize); 5] = [
        (&[A21], 1),
        (&[A31, A32], 2),
        (&[A41, A42, A43], 3),
        (&[A51, A52, A53, A54], 4),
        (&[A61, A62, A63, A64, A65], 5),
    ];
    for (coef, s) in stages {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in coef.iter().enumerate() {
                acc += a * w.k[j][i];
            }
            w.ytmp[i] = y[i] + h * acc;
        }
        f.eval(&w.ytmp, &mut w.k[s])
            .map_err(|e| StepFailure::Eval(e, w.ytmp.clone()))?;
    }
    for i in 0..n {
        w.y1[i] = y[i]
            + h * (A71 * w.k[0][i] + A73 * w.k[2][i] + A74 * w.k[3][i] + A75 * w.k[4][i]
                + A76 * w.k[5][i]);
    }
    let y1 = w.y1.clone();
    f.eval(&y1, &mut w.k[6])
        .map_err(|e| StepFailure::Eval(e, y1.clone()))?;
    let mut err = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * w.k[0][i] + E3 * w.k[2][i] + E4 * w.k[3][i] + E5 * w.k[4][i]
                + E6 * w.k[5][i]
                + E7 * w.k[6][i]);
        let sk = 1.0 + y[i].abs().max(w.y1[i].abs());
        err += (e / sk) * (e / sk);
    }
    Ok((err / n as f64).sqrt())
}

pub fn integrate<F: Field + ?Sized>(
    f: &F,
    x0: &[f64],
    t_span: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, FlowError> {
    integrate_with_events(f, x0, t_span, opts, &[])
}

/// Integrate from `x0` for time `t_span` (either sign), recording crossings of
/// the given events. A terminal event ends the integration at the crossing.
pub fn integrate_with_events<F: Field + ?Sized>(
    f: &F,
    x0: &[f64],
    t_span: f64,
    opts: &IntegrateOptions,
    events: &[EventSpec],
) -> Result<Trajectory, FlowError> {
    let chart = f.chart().clone();
    let n = chart.dim();
    if x0.len() != n {
        return Err(FlowError::InvalidStart {
            point: x0.to_vec(),
            reason: format!("expected {n} coordinates"),
        });
    }
    let mut y = x0.to_vec();
    chart.wrap(&mut y);
    if let Some(_) = chart.violation(&y) {
        return Err(FlowError::InvalidStart {
            point: x0.to_vec(),
            reason: format!("outside the chart ({})", chart.face(&y)),
        });
    }
    let mut traj = Trajectory {
        field: String::new(),
        x0: y.clone(),
        times: vec![0.0],
        states: vec![y.clone()],
        steps: Vec::new(),
        events: Vec::new(),
        chart: chart.clone(),
    };
    if t_span == 0.0 {
        return Ok(traj);
    }
    let dir = t_span.signum();
    let tol = opts.tol * LOCAL_FRACTION;
    let mut w = Work {
        k: std::array::from_fn(|_| vec![0.0; n]),
        ytmp: vec![0.0; n],
        y1: vec![0.0; n],
    };
    f.eval(&y, &mut w.k[0]).map_err(|e| FlowError::InvalidStart {
        point: x0.to_vec(),
        reason: e.to_string(),
    })?;
    let mut h = dir * initial_step(f, &y, &w.k[0].clone(), dir, tol, opts.h_max);
    h = cap_periodic(&chart, &w.k[0], h);
    let h_min = 1e-14 * t_span.abs().max(1.0);
    let mut t = 0.0;
    let mut facold: f64 = 1e-4;
    let mut rejected_last = false;
    let mut steps = 0usize;

    loop {
        if (t_span - t) * dir <= 0.0 {
            return Ok(traj);
        }
        if steps >= opts.max_steps {
            return Err(FlowError::MaxSteps {
                trajectory: Box::new(traj),
            });
        }
        steps += 1;
        let remaining = t_span - t;
        if (h.abs()) >= remaining.abs() * (1.0 - 1e-12) {
            h = remaining;
        }
        if h.abs() < h_min {
            return Err(FlowError::StepUnderflow {
                t,
                cause: "step size below resolution".into(),
                trajectory: Box::new(traj),
            });
        }
        let err = match try_step(f, &y, h, &mut w) {
            Ok(e) => e / tol,
            Err(StepFailure::Eval(e, at)) => {
                // Stage left the region where the field is defined: shrink.
                h *= 0.25;
                rejected_last = true;
                if h.abs() < h_min {
                    let mut yw = at.clone();
                    chart.wrap(&mut yw);
                    if !chart.contains(&yw) {
                        let face = chart.face(&yw);
                        return Err(FlowError::DomainExit {
                            trajectory: Box::new(traj),
                            face,
                        });
                    }
                    return Err(FlowError::StepUnderflow {
                        t,
                        cause: e.to_string(),
                        trajectory: Box::new(traj),
                    });
                }
                continue;
            }
        };
        let expo1 = 0.2 - BETA * 0.75;
        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut hnew = h / fac;
            facold = err.max(1e-4);
            if rejected_last && hnew.abs() > h.abs() {
                hnew = h;
            }
            rejected_last = false;

            // Accept: build the continuous extension.
            let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let ydiff = w.y1[i] - y[i];
                let bspl = h * w.k[0][i] - ydiff;
                r[0][i] = y[i];
                r[1][i] = ydiff;
                r[2][i] = bspl;
                r[3][i] = ydiff - h * w.k[6][i] - bspl;
                r[4][i] = h
                    * (D1 * w.k[0][i] + D3 * w.k[2][i] + D4 * w.k[3][i] + D5 * w.k[4][i]
                        + D6 * w.k[5][i]
                        + D7 * w.k[6][i]);
            }
            let step = DenseStep { t0: t, h, err, r };
            let t1 = t + h;
            let mut y1 = w.y1.clone();
            chart.wrap(&mut y1);

            // Domain check on the accepted endpoint.
            if !chart.contains(&y1) {
                let theta = exit_theta(&chart, &step);
                let mut ye = vec![0.0; n];
                step.at_theta(theta, &mut ye);
                chart.wrap(&mut ye);
                let face = chart.face(&{
                    let mut yo = vec![0.0; n];
                    step.at_theta(1.0, &mut yo);
                    chart.wrap(&mut yo);
                    yo
                });
                let te = t + theta * h;
                scan_events(f, &chart, events, &step, theta, &mut traj, n);
                traj.steps.push(step);
                traj.times.push(te);
                traj.states.push(ye);
                return Err(FlowError::DomainExit {
                    trajectory: Box::new(traj),
                    face,
                });
            }

            let stop = scan_events(f, &chart, events, &step, 1.0, &mut traj, n);
            traj.steps.push(step);
            if let Some((te, ye)) = stop {
                traj.times.push(te);
                traj.states.push(ye);
                return Ok(traj);
            }
            traj.times.push(t1);
            traj.states.push(y1.clone());
            t = t1;
            // FSAL: derivative at the unwrapped endpoint equals that at the
            // wrapped one for periodic coordinates.
            let k7 = w.k[6].clone();
            w.k[0].copy_from_slice(&k7);
            y = y1;
            h = cap_periodic(&chart, &w.k[0], hnew.signum() * hnew.abs().min(opts.h_max));
        } else {
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
    }
}

/// Cap `h` so no periodic coordinate advances more than an eighth of its
/// period per step; keeps section crossings on angles unambiguous.
fn cap_periodic(chart: &Chart, k: &[f64], h: f64) -> f64 {
    let mut rate: f64 = 0.0;
    for (i, p) in chart.periods.iter().enumerate() {
        if let Some(p) = p {
            rate = rate.max(k[i].abs() / p);
        }
    }
    if rate > 0.0 {
        let cap = 0.125 / rate;
        if h.abs() > cap {
            return h.signum() * cap;
        }
    }
    h
}

/// Largest `θ` on the step whose dense state is still inside the chart.
fn exit_theta(chart: &Chart, s: &DenseStep) -> f64 {
    let n = s.y0().len();
    let mut y = vec![0.0; n];
    let inside = |theta: f64, y: &mut Vec<f64>| {
        s.at_theta(theta, y);
        chart.wrap(y);
        chart.contains(y)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid, &mut y) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Locate crossings on `[0, theta_end]` of the step. Returns the terminal
/// stop, if any.
fn scan_events<F: Field + ?Sized>(
    f: &F,
    chart: &Chart,
    events: &[EventSpec],
    s: &DenseStep,
    theta_end: f64,
    traj: &mut Trajectory,
    n: usize,
) -> Option<(f64, Vec<f64>)> {
    let mut first: Option<(f64, usize, Located)> = None;
    for (which, ev) in events.iter().enumerate() {
        if let Some(hit) = ev.locate(f, chart, s, theta_end, n) {
            if ev.terminal {
                if first.as_ref().map_or(true, |(th, _, _)| hit.theta < *th) {
                    first = Some((hit.theta, which, hit.clone()));
                }
            }
            traj.events.push(Event {
                which,
                t: s.t0 + hit.theta * s.h,
                state: hit.state.clone(),
                sign: hit.sign,
                rate: hit.rate,
            });
        }
    }
    let (theta, _, hit) = first?;
    // Drop non-terminal events recorded beyond the stop.
    let t_stop = s.t0 + theta * s.h;
    let dir = s.h.signum();
    traj.events.retain(|e| (e.t - t_stop) * dir <= 0.0);
    Some((t_stop, hit.state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorField;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn oscillator() -> VectorField {
        let c = Arc::new(Chart::euclidean("plane", &["x", "y"]));
        VectorField::parse(&c, &["-y", "x"]).unwrap()
    }

    #[test]
    fn constant_field_moves_linearly() {
        let c = Arc::new(Chart::euclidean("r3", &["x", "y", "z"]));
        let x = VectorField::parse(&c, &["0", "0", "1"]).unwrap();
        let tr = integrate(&x, &[1.0, 0.0, 0.0], 1.0, &IntegrateOptions::tol(1e-12)).unwrap();
        let e = tr.end_state();
        assert!((e[0] - 1.0).abs() < 1e-12 && e[1].abs() < 1e-12 && (e[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oscillator_closes_after_two_pi() {
        let tr = integrate(&oscillator(), &[1.0, 0.0], 2.0 * PI, &IntegrateOptions::tol(1e-12)).unwrap();
        let e = tr.end_state();
        assert!((e[0] - 1.0).abs() < 1e-10 && e[1].abs() < 1e-10, "{e:?}");
        assert!(tr.steps.iter().all(|s| s.err <= 1.0));
    }

    #[test]
    fn dense_output_tracks_exact_solution() {
        let tr = integrate(&oscillator(), &[1.0, 0.0], 10.0, &IntegrateOptions::tol(1e-10)).unwrap();
        for (t, y) in tr.sample(333) {
            assert!((y[0] - t.cos()).abs() < 1e-8 && (y[1] - t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn backward_integration() {
        let tr = integrate(&oscillator(), &[1.0, 0.0], -PI / 2.0, &IntegrateOptions::tol(1e-12)).unwrap();
        let e = tr.end_state();
        assert!(e[0].abs() < 1e-10 && (e[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn periodic_coordinates_wrap() {
        let c = Arc::new(Chart::new("cyl", &["θ", "z"], &[(0.0, 1.0), (-1.0, 1.0)]).unwrap().angle(0));
        let x = VectorField::parse(&c, &["1", "0"]).unwrap();
        let tr = integrate(&x, &[6.0, 0.0], 1.0, &IntegrateOptions::tol(1e-12)).unwrap();
        assert!((tr.end_state()[0] - (7.0 - 2.0 * PI)).abs() < 1e-12);
        assert!((tr.eval(0.5)[0] - (6.5 - 2.0 * PI)).abs() < 1e-12);
        assert!((tr.eval(0.2)[0] - 6.2).abs() < 1e-12);
    }

    #[test]
    fn domain_exit_reports_face_and_partial_path() {
        let c = Arc::new(Chart::new("strip", &["x", "y"], &[(0.0, 1.0), (-1.0, 1.0)]).unwrap());
        let x = VectorField::parse(&c, &["1", "0"]).unwrap();
        match integrate(&x, &[0.5, 0.0], 2.0, &IntegrateOptions::default()) {
            Err(FlowError::DomainExit { trajectory, face }) => {
                assert_eq!(face, "x = 1");
                assert!((trajectory.t_end() - 0.5).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
