//! Event functions on dense output and the Poincaré return map.

use crate::calculus::Chart;
use crate::expr::Expression;

use super::integrator::{integrate_with_events, DenseStep, IntegrateOptions};
use super::{Field, FlowError};

#[derive(Clone, Debug)]
pub enum Section {
    /// `n · (x - origin) = 0`, periodic components measured the short way.
    Hyperplane { origin: Vec<f64>, normal: Vec<f64> },
    /// `h(x) = level`, evaluated on the unwrapped state within each step.
    Level { h: Expression, level: f64 },
}

impl Section {
    /// Value at a single (wrapped) point.
    pub fn value(&self, chart: &Chart, x: &[f64]) -> f64 {
        match self {
            Section::Hyperplane { origin, normal } => {
                dot(normal, &chart.delta(origin, x))
            }
            Section::Level { h, level } => h.eval(x).map(|v| v - level).unwrap_or(f64::NAN),
        }
    }

    fn rate<F: Field + ?Sized>(&self, f: &F, x: &[f64]) -> f64 {
        let Ok(v) = f.at(x) else {
            return f64::NAN;
        };
        match self {
            Section::Hyperplane { normal, .. } => dot(normal, &v),
            Section::Level { h, .. } => h.eval_dual(x, &v).map(|r| r.1).unwrap_or(f64::NAN),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A section crossing to detect during integration.
#[derive(Clone, Debug)]
pub struct EventSpec {
    pub section: Section,
    /// `+1`: increasing crossings only, `-1`: decreasing only, `0`: both.
    pub direction: i8,
    /// Stop integrating at the first accepted crossing.
    pub terminal: bool,
    /// Crossings at `|t| < t_min` are ignored.
    pub t_min: f64,
    /// Crossings with `|rate| < min_rate` are treated as tangential and skipped.
    pub min_rate: f64,
}

impl EventSpec {
    pub fn new(section: Section, direction: i8) -> Self {
        EventSpec {
            section,
            direction,
            terminal: false,
            t_min: 0.0,
            min_rate: 1e-9,
        }
    }

    pub fn terminal(mut self, t_min: f64) -> Self {
        self.terminal = true;
        self.t_min = t_min;
        self
    }

    fn on_step(&self, chart: &Chart, s: &DenseStep, theta: f64, buf: &mut [f64]) -> f64 {
        s.at_theta(theta, buf);
        match &self.section {
            Section::Hyperplane { origin, normal } => {
                let base = chart.delta(origin, s.y0());
                normal
                    .iter()
                    .enumerate()
                    .map(|(i, n)| n * (base[i] + buf[i] - s.y0()[i]))
                    .sum()
            }
            Section::Level { h, level } => h.eval(buf).map(|v| v - level).unwrap_or(f64::NAN),
        }
    }

    pub(crate) fn locate<F: Field + ?Sized>(
        &self,
        f: &F,
        chart: &Chart,
        s: &DenseStep,
        theta_end: f64,
        n: usize,
    ) -> Option<Located> {
        let mut buf = vec![0.0; n];
        let g0 = self.on_step(chart, s, 0.0, &mut buf);
        let g1 = self.on_step(chart, s, theta_end, &mut buf);
        if !(g0.is_finite() && g1.is_finite()) || g0 == 0.0 || g0 * g1 > 0.0 {
            return None;
        }
        let sign: i8 = if g1 > g0 { 1 } else { -1 };
        if self.direction != 0 && sign != self.direction {
            return None;
        }
        // Illinois false position on θ.
        let (mut a, mut b, mut ga, mut gb) = (0.0, theta_end, g0, g1);
        let tol_theta = 1e-13 / s.h.abs().max(1e-300);
        let mut side = 0;
        let mut theta = b;
        for _ in 0..200 {
            if gb == 0.0 {
                theta = b;
                break;
            }
            let c = (a * gb - b * ga) / (gb - ga);
            let gc = self.on_step(chart, s, c, &mut buf);
            theta = c;
            if gc == 0.0 || (b - a).abs() < tol_theta {
                break;
            }
            if gc * gb < 0.0 {
                a = b;
                ga = gb;
                side = 0;
            } else {
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
            b = c;
            gb = gc;
            if (b - a).abs() < tol_theta {
                break;
            }
        }
        let t = s.t0 + theta * s.h;
        if t.abs() < self.t_min {
            return None;
        }
        s.at_theta(theta, &mut buf);
        chart.wrap(&mut buf);
        let rate = self.section.rate(f, &buf);
        if !(rate.abs() >= self.min_rate) {
            log::debug!("tangential crossing skipped at t = {t} (rate {rate:e})");
            return None;
        }
        Some(Located {
            theta,
            state: buf,
            sign,
            rate,
        })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Located {
    pub theta: f64,
    pub state: Vec<f64>,
    pub sign: i8,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReturnOutcome {
    Returned { point: Vec<f64>, time: f64 },
    NoReturn { t_max: f64 },
    Exited { time: f64, face: String },
}

/// First transversal return to `section` in the requested direction after
/// `t_min = 1e-3 · t_max`.
pub fn return_map<F: Field + ?Sized>(
    f: &F,
    section: &Section,
    direction: i8,
    x0: &[f64],
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<ReturnOutcome, FlowError> {
    let chart = f.chart();
    let h0 = section.value(chart, x0);
    if !(h0.abs() <= 1e-9) {
        return Err(FlowError::InvalidStart {
            point: x0.to_vec(),
            reason: format!("not on the section (h = {h0:e})"),
        });
    }
    let rate = section.rate(f, x0);
    if direction != 0 && !(rate * direction as f64 > 0.0) {
        return Err(FlowError::InvalidStart {
            point: x0.to_vec(),
            reason: format!("field crosses the section with the wrong sign (rate {rate:e})"),
        });
    }
    let ev = EventSpec::new(section.clone(), direction).terminal(1e-3 * t_max.abs());
    match integrate_with_events(f, x0, t_max, opts, std::slice::from_ref(&ev)) {
        Ok(tr) => Ok(match tr.events.last() {
            Some(e) => ReturnOutcome::Returned {
                point: e.state.clone(),
                time: e.t,
            },
            None => ReturnOutcome::NoReturn { t_max },
        }),
        Err(FlowError::DomainExit { trajectory, face }) => Ok(match trajectory.events.first() {
            Some(e) => ReturnOutcome::Returned {
                point: e.state.clone(),
                time: e.t,
            },
            None => ReturnOutcome::Exited {
                time: trajectory.t_end(),
                face,
            },
        }),
        Err(e) => Err(e),
    }
}
