//! Quadrature of pulled-back forms over rectangular parameter domains.

use std::f64::consts::PI;

use crate::par::{self, Execution};

use super::{CalcError, ChartMap, DifferentialForm};

/// Nodes per axis and execution mode. Periodic source axes use the trapezoid
/// rule with the same node count; bounded axes use Gauss–Legendre.
#[derive(Clone, Copy, Debug)]
pub struct Rule {
    pub nodes: usize,
    pub exec: Execution,
}

impl Default for Rule {
    fn default() -> Self {
        Rule {
            nodes: 32,
            exec: Execution::default(),
        }
    }
}

impl Rule {
    pub fn with_nodes(nodes: usize) -> Self {
        Rule {
            nodes,
            ..Rule::default()
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn axis_rule(lo: f64, hi: f64, periodic: bool, n: usize) -> Result<(Vec<f64>, Vec<f64>), CalcError> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(CalcError::Invalid("quadrature needs a bounded source domain".into()));
    }
    if periodic {
        let h = (hi - lo) / n as f64;
        return Ok(((0..n).map(|i| lo + i as f64 * h).collect(), vec![h; n]));
    }
    let (x, w) = gauss_legendre(n);
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    Ok((x.iter().map(|t| c + r * t).collect(), w.iter().map(|t| r * t).collect()))
}

/// `∫ F*ω` for a 2-form `ω` and a map from a 2-dimensional rectangular chart.
/// Orientation follows the source coordinate order.
pub fn integrate_form(f: &ChartMap, omega: &DifferentialForm, rule: Rule) -> Result<f64, CalcError> {
    let src = f.source();
    if src.dim() != 2 {
        return Err(CalcError::Invalid(format!(
            "surface integral needs a 2-dimensional source, `{}` has {}",
            src.name,
            src.dim()
        )));
    }
    if omega.degree() != 2 {
        return Err(CalcError::Degree(omega.degree(), 2));
    }
    if **omega.chart() != **f.target() {
        return Err(CalcError::ChartMismatch);
    }
    let (xa, wa) = axis_rule(src.bounds[0].0, src.bounds[0].1, src.is_periodic(0), rule.nodes)?;
    let (xb, wb) = axis_rule(src.bounds[1].0, src.bounds[1].1, src.is_periodic(1), rule.nodes)?;
    let rows = par::map_range(rule.exec, xa.len(), |i| -> Result<f64, CalcError> {
        let mut s = 0.0;
        for (j, &b) in xb.iter().enumerate() {
            let c = omega.pullback_at(f, &[xa[i], b])?;
            s += wb[j] * c.get(&vec![0, 1]).copied().unwrap_or(0.0);
        }
        Ok(wa[i] * s)
    });
    rows.into_iter().sum()
}

/// `∮ F*ω` for a 1-form along a map from a 1-dimensional chart.
pub fn integrate_line(f: &ChartMap, omega: &DifferentialForm, rule: Rule) -> Result<f64, CalcError> {
    let src = f.source();
    if src.dim() != 1 {
        return Err(CalcError::Invalid("line integral needs a 1-dimensional source".into()));
    }
    if omega.degree() != 1 {
        return Err(CalcError::Degree(omega.degree(), 1));
    }
    if **omega.chart() != **f.target() {
        return Err(CalcError::ChartMismatch);
    }
    let (x, w) = axis_rule(src.bounds[0].0, src.bounds[0].1, src.is_periodic(0), rule.nodes)?;
    let vals = par::map_range(rule.exec, x.len(), |i| -> Result<f64, CalcError> {
        let c = omega.pullback_at(f, &[x[i]])?;
        Ok(w[i] * c.get(&vec![0]).copied().unwrap_or(0.0))
    });
    vals.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Chart;
    use std::sync::Arc;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_square_area() {
        let sq = Arc::new(Chart::new("sq", &["x", "y"], &[(0.0, 1.0), (0.0, 1.0)]).unwrap());
        let w = DifferentialForm::basis(&sq, &[0, 1]).unwrap();
        let a = integrate_form(&ChartMap::identity(&sq), &w, Rule::default()).unwrap();
        assert!((a - 1.0).abs() < 1e-14);
    }
}
