use std::f64::consts::PI;
use std::sync::Arc;

use crate::expr::Expression;

use super::CalcError;

#[derive(Clone, Debug)]
pub struct Chart {
    pub name: String,
    coords: Arc<[String]>,
    /// Validity box; for periodic coordinates the fundamental interval.
    pub bounds: Vec<(f64, f64)>,
    pub periods: Vec<Option<f64>>,
    /// Optional extra constraint: the point is valid where this is `>= 0`.
    pub predicate: Option<Expression>,
}

impl PartialEq for Chart {
    fn eq(&self, o: &Self) -> bool {
        self.name == o.name && self.coords == o.coords
    }
}

impl Chart {
    pub fn new(name: &str, coords: &[&str], bounds: &[(f64, f64)]) -> Result<Self, CalcError> {
        if coords.is_empty() || coords.len() != bounds.len() {
            return Err(CalcError::Invalid(format!(
                "chart `{name}` needs one bound per coordinate and at least one coordinate"
            )));
        }
        if let Some((i, _)) = bounds.iter().enumerate().find(|(_, b)| !(b.0 <= b.1)) {
            return Err(CalcError::Invalid(format!(
                "chart `{name}`: empty interval for `{}`",
                coords[i]
            )));
        }
        Ok(Chart {
            name: name.to_string(),
            coords: coords.iter().map(|s| s.to_string()).collect(),
            bounds: bounds.to_vec(),
            periods: vec![None; coords.len()],
            predicate: None,
        })
    }

    /// Unbounded chart, handy in tests and for auxiliary domains.
    pub fn euclidean(name: &str, coords: &[&str]) -> Self {
        let b = vec![(f64::NEG_INFINITY, f64::INFINITY); coords.len()];
        Chart::new(name, coords, &b).expect("nonempty coordinate list")
    }

    /// Mark coordinate `i` periodic with fundamental interval `[lo, lo + period)`.
    pub fn periodic(mut self, i: usize, lo: f64, period: f64) -> Self {
        assert!(period > 0.0, "period must be positive");
        self.periods[i] = Some(period);
        self.bounds[i] = (lo, lo + period);
        self
    }

    pub fn angle(self, i: usize) -> Self {
        self.periodic(i, 0.0, 2.0 * PI)
    }

    pub fn with_predicate(mut self, p: Expression) -> Self {
        self.predicate = Some(p);
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &Arc<[String]> {
        &self.coords
    }

    pub fn coord_names(&self) -> Vec<&str> {
        self.coords.iter().map(String::as_str).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.periods[i].is_some()
    }

    pub fn var(&self, i: usize) -> Expression {
        Expression::var(i, self.coords.clone())
    }

    pub fn constant(&self, c: f64) -> Expression {
        Expression::constant(c, self.coords.clone())
    }

    pub fn parse(&self, src: &str) -> Result<Expression, CalcError> {
        Ok(Expression::parse(src, &self.coord_names())?)
    }

    /// Bring periodic coordinates into their fundamental interval.
    pub fn wrap(&self, x: &mut [f64]) {
        for (i, p) in self.periods.iter().enumerate() {
            if let Some(p) = p {
                let lo = self.bounds[i].0;
                let mut v = (x[i] - lo).rem_euclid(*p) + lo;
                if v >= lo + p {
                    v = lo;
                }
                x[i] = v;
            }
        }
    }

    /// `b - a`, with periodic components reduced to `[-P/2, P/2)`.
    pub fn delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        for (i, p) in self.periods.iter().enumerate() {
            if let Some(p) = p {
                d[i] = (d[i] + 0.5 * p).rem_euclid(*p) - 0.5 * p;
            }
        }
        d
    }

    /// Euclidean norm of [`Chart::delta`].
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.delta(a, b).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Index of the first violated bound (coordinate index), or `dim()` for
    /// the predicate; `None` if the point is valid.
    pub fn violation(&self, x: &[f64]) -> Option<usize> {
        for i in 0..self.dim() {
            if self.periods[i].is_none() {
                let (lo, hi) = self.bounds[i];
                if !(x[i] >= lo && x[i] <= hi) {
                    return Some(i);
                }
            }
        }
        if let Some(p) = &self.predicate {
            match p.eval(x) {
                Ok(v) if v >= 0.0 => {}
                _ => return Some(self.dim()),
            }
        }
        None
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.violation(x).is_none()
    }

    /// Human-readable description of the face a point crossed.
    pub fn face(&self, x: &[f64]) -> String {
        match self.violation(x) {
            None => "interior".into(),
            Some(i) if i == self.dim() => "predicate".into(),
            Some(i) => {
                let (lo, hi) = self.bounds[i];
                if x[i] < lo {
                    format!("{} = {lo}", self.coords[i])
                } else if x[i] > hi {
                    format!("{} = {hi}", self.coords[i])
                } else {
                    format!("{} is NaN", self.coords[i])
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_delta_respect_period() {
        let c = Chart::new("c", &["r", "θ"], &[(0.0, 1.0), (0.0, 1.0)])
            .unwrap()
            .angle(1);
        let mut x = [0.5, -0.1];
        c.wrap(&mut x);
        assert!((x[1] - (2.0 * PI - 0.1)).abs() < 1e-15);
        let d = c.delta(&[0.0, 0.1], &[0.0, 2.0 * PI - 0.1]);
        assert!((d[1] + 0.2).abs() < 1e-14);
        assert!(c.contains(&[0.5, 100.0]));
        assert!(!c.contains(&[1.5, 0.0]));
        assert_eq!(c.face(&[1.5, 0.0]), "r = 1");
    }

    #[test]
    fn rejects_empty_domain() {
        assert!(Chart::new("c", &["x"], &[(1.0, 0.0)]).is_err());
        assert!(Chart::new("c", &[], &[]).is_err());
    }
}
