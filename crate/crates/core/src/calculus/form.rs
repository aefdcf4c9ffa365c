use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::expr::{Expression, Jet};

use super::{CalcError, Chart, ChartMap, VectorField};

/// Sort `idx` and return the sign of the sorting permutation, or `None` if an
/// index repeats (the wedge vanishes). Every sign in this module goes through here.
pub fn perm_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    // Insertion sort counting transpositions; k is tiny.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// Strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// All permutations of `0..k` with their signs.
fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(rest: Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for (i, &r) in rest.iter().enumerate() {
            let mut next = rest.clone();
            next.remove(i);
            cur.push(r);
            rec(next, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec((0..k).collect(), &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|p| {
            let s = perm_sign(&p).expect("permutation").1;
            (p, s)
        })
        .collect()
}

/// Determinant of the `k×k` matrix `m(a, b)` by the Leibniz expansion.
pub fn det_by<F: Fn(usize, usize) -> f64>(k: usize, m: F) -> f64 {
    match k {
        0 => 1.0,
        1 => m(0, 0),
        2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        _ => permutations(k)
            .iter()
            .map(|(p, s)| s * p.iter().enumerate().map(|(a, &b)| m(a, b)).product::<f64>())
            .sum(),
    }
}

#[derive(Clone)]
pub struct DifferentialForm {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expression>,
}

impl fmt::Debug for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = self.chart.coords();
        for (n, (idx, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (j, i) in idx.iter().enumerate() {
                let sep = if j == 0 { " " } else { "∧" };
                write!(f, "{sep}d{}", names[*i])?;
            }
        }
        Ok(())
    }
}

impl DifferentialForm {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> Self {
        assert!(degree <= chart.dim(), "degree exceeds chart dimension");
        DifferentialForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Build from `(indices, coefficient)` pairs; indices in any order, repeated
    /// tuples are summed and signs normalized.
    pub fn from_terms(
        chart: &Arc<Chart>,
        degree: usize,
        terms: Vec<(Vec<usize>, Expression)>,
    ) -> Result<Self, CalcError> {
        if degree > chart.dim() {
            return Err(CalcError::Degree(degree, chart.dim()));
        }
        let mut f = Self::zero(chart, degree);
        for (idx, c) in terms {
            if idx.len() != degree || idx.iter().any(|&i| i >= chart.dim()) {
                return Err(CalcError::Invalid(format!(
                    "index tuple {idx:?} does not fit a {degree}-form on {}",
                    chart.name
                )));
            }
            if c.dim() != chart.dim() {
                return Err(CalcError::ChartMismatch);
            }
            f.accumulate(&idx, c, 1.0);
        }
        Ok(f)
    }

    /// `Σ cᵢ dxⁱ`.
    pub fn one_form(chart: &Arc<Chart>, coeffs: Vec<Expression>) -> Result<Self, CalcError> {
        let terms = coeffs.into_iter().enumerate().map(|(i, c)| (vec![i], c)).collect();
        Self::from_terms(chart, 1, terms)
    }

    pub fn function(chart: &Arc<Chart>, f: Expression) -> Result<Self, CalcError> {
        Self::from_terms(chart, 0, vec![(vec![], f)])
    }

    /// `dx^{i₁} ∧ … ∧ dx^{i_k}` with unit coefficient.
    pub fn basis(chart: &Arc<Chart>, idx: &[usize]) -> Result<Self, CalcError> {
        Self::from_terms(chart, idx.len(), vec![(idx.to_vec(), chart.constant(1.0))])
    }

    fn accumulate(&mut self, idx: &[usize], c: Expression, scale: f64) {
        let Some((sorted, sign)) = perm_sign(idx) else {
            return;
        };
        if c.is_zero() {
            return;
        }
        let c = if sign * scale == 1.0 { c } else { c.scale(sign * scale) };
        let entry = match self.terms.remove(&sorted) {
            Some(prev) => prev.add(&c),
            None => c,
        };
        if !entry.is_zero() {
            self.terms.insert(sorted, entry);
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expression)> {
        self.terms.iter()
    }

    pub fn coeff(&self, idx: &[usize]) -> Option<&Expression> {
        self.terms.get(idx)
    }

    /// The one-form coefficients as a dense vector (zeros filled in).
    pub fn components(&self) -> Vec<Expression> {
        assert_eq!(self.degree, 1, "components() needs a 1-form");
        (0..self.chart.dim())
            .map(|i| {
                self.terms
                    .get(&vec![i])
                    .cloned()
                    .unwrap_or_else(|| self.chart.constant(0.0))
            })
            .collect()
    }

    fn same_chart(&self, o: &DifferentialForm) -> Result<(), CalcError> {
        if *self.chart == *o.chart {
            Ok(())
        } else {
            Err(CalcError::ChartMismatch)
        }
    }

    pub fn add(&self, o: &DifferentialForm) -> Result<Self, CalcError> {
        self.same_chart(o)?;
        if self.degree != o.degree {
            return Err(CalcError::Invalid("adding forms of different degree".into()));
        }
        let mut r = self.clone();
        for (idx, c) in &o.terms {
            r.accumulate(idx, c.clone(), 1.0);
        }
        Ok(r)
    }

    /// Multiply every coefficient by a function.
    pub fn times(&self, f: &Expression) -> Self {
        let mut r = Self::zero(&self.chart, self.degree);
        for (idx, c) in &self.terms {
            r.accumulate(idx, c.mul(f), 1.0);
        }
        r
    }

    pub fn wedge(&self, o: &DifferentialForm) -> Result<Self, CalcError> {
        self.same_chart(o)?;
        let k = self.degree + o.degree;
        if k > self.chart.dim() {
            return Err(CalcError::Degree(k, self.chart.dim()));
        }
        let mut r = Self::zero(&self.chart, k);
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                let idx: Vec<usize> = a.iter().chain(b).copied().collect();
                r.accumulate(&idx, ca.mul(cb), 1.0);
            }
        }
        Ok(r)
    }

    /// Exterior derivative; partials are derivative nodes evaluated by AD.
    pub fn d(&self) -> Self {
        let n = self.chart.dim();
        if self.degree == n {
            return Self::zero(&self.chart, n);
        }
        let mut r = Self::zero(&self.chart, self.degree + 1);
        for (idx, c) in &self.terms {
            if c.as_const().is_some() {
                continue;
            }
            for j in 0..n {
                let mut full = vec![j];
                full.extend_from_slice(idx);
                r.accumulate(&full, c.partial(j), 1.0);
            }
        }
        r
    }

    /// Contraction of `X` into the first slot.
    pub fn interior(&self, x: &VectorField) -> Result<Self, CalcError> {
        if **x.chart() != *self.chart {
            return Err(CalcError::ChartMismatch);
        }
        if self.degree == 0 {
            return Err(CalcError::Degree(0, 0));
        }
        let mut r = Self::zero(&self.chart, self.degree - 1);
        for (idx, c) in &self.terms {
            for (m, &i) in idx.iter().enumerate() {
                let xi = &x.components()[i];
                if xi.is_zero() {
                    continue;
                }
                let rest: Vec<usize> = idx.iter().enumerate().filter(|&(q, _)| q != m).map(|(_, &v)| v).collect();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                r.accumulate(&rest, c.mul(xi), sign);
            }
        }
        Ok(r)
    }

    /// `F*ω` as a form on the source chart. The image of a sample grid is
    /// checked against the target domain.
    pub fn pullback(&self, f: &ChartMap) -> Result<Self, CalcError> {
        if **f.target() != *self.chart {
            return Err(CalcError::ChartMismatch);
        }
        let m = f.source().dim();
        if self.degree > m {
            return Err(CalcError::Degree(self.degree, m));
        }
        f.check_image(4)?;
        let jac = f.jacobian_exprs();
        let comps = f.components();
        let mut r = Self::zero(f.source(), self.degree);
        for (idx, c) in &self.terms {
            let pulled = c.compose(comps);
            for cols in combinations(m, self.degree) {
                let minor = det_expr(self.degree, |a, b| jac[idx[a]][cols[b]].clone(), f.source());
                r.accumulate(&cols, pulled.mul(&minor), 1.0);
            }
        }
        Ok(r)
    }

    /// Coefficient values at a point, keyed like the terms.
    pub fn eval_coeffs(&self, x: &[f64]) -> Result<Vec<(Vec<usize>, f64)>, CalcError> {
        self.terms
            .iter()
            .map(|(idx, c)| Ok((idx.clone(), c.eval(x)?)))
            .collect()
    }

    /// `ω_x(v₁, …, v_k)`.
    pub fn eval_on(&self, x: &[f64], vectors: &[&[f64]]) -> Result<f64, CalcError> {
        if vectors.len() != self.degree {
            return Err(CalcError::Degree(vectors.len(), self.degree));
        }
        let mut s = 0.0;
        for (idx, c) in &self.terms {
            let det = det_by(self.degree, |a, b| vectors[b][idx[a]]);
            if det != 0.0 {
                s += c.eval(x)? * det;
            }
        }
        Ok(s)
    }

    /// Coefficients of `dω` at a point, computed from first partials of the
    /// coefficients without building derivative nodes.
    pub fn d_at(&self, x: &[f64]) -> Result<BTreeMap<Vec<usize>, f64>, CalcError> {
        let jets = Jet::point(x);
        let mut out = BTreeMap::new();
        for (idx, c) in &self.terms {
            let g: Jet = c.eval_num(&jets)?;
            for (j, &dj) in g.partials().iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let mut full = vec![j];
                full.extend_from_slice(idx);
                if let Some((sorted, sign)) = perm_sign(&full) {
                    *out.entry(sorted).or_insert(0.0) += sign * dj;
                }
            }
        }
        Ok(out)
    }

    /// Coefficients of `F*ω` at a source point, from the numerical Jacobian.
    pub fn pullback_at(
        &self,
        f: &ChartMap,
        x: &[f64],
    ) -> Result<BTreeMap<Vec<usize>, f64>, CalcError> {
        let (y, jac) = f.eval_with_jacobian(x)?;
        let m = f.source().dim();
        let mut out = BTreeMap::new();
        for (idx, c) in &self.terms {
            let v = c.eval(&y)?;
            for cols in combinations(m, self.degree) {
                let det = det_by(self.degree, |a, b| jac[idx[a]][cols[b]]);
                *out.entry(cols).or_insert(0.0) += v * det;
            }
        }
        Ok(out)
    }

    /// Largest absolute coefficient at a point.
    pub fn max_abs_at(&self, x: &[f64]) -> Result<f64, CalcError> {
        Ok(self
            .eval_coeffs(x)?
            .iter()
            .fold(0.0f64, |m, (_, v)| m.max(v.abs())))
    }
}

fn det_expr<F: Fn(usize, usize) -> Expression>(k: usize, m: F, chart: &Chart) -> Expression {
    match k {
        0 => chart.constant(1.0),
        1 => m(0, 0),
        2 => m(0, 0).mul(&m(1, 1)).sub(&m(0, 1).mul(&m(1, 0))),
        _ => permutations(k).iter().fold(chart.constant(0.0), |acc, (p, s)| {
            let prod = p
                .iter()
                .enumerate()
                .fold(chart.constant(*s), |t, (a, &b)| t.mul(&m(a, b)));
            acc.add(&prod)
        }),
    }
}
