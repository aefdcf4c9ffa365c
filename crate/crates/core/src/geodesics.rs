//! Riemannian metrics on charts, geodesic flow, and the Liouville contact form
//! on the unit cotangent bundle of a surface.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::calculus::{CalcError, Chart, ChartMap, DifferentialForm};
use crate::contact::ContactStructure;
use crate::calculus::VectorField;
use crate::expr::{Expression, Func, Jet, OpaqueFn};
use crate::flow::{integrate, Field, FieldError, FlowError, IntegrateOptions, Trajectory};
use crate::sampling::Grid;

#[derive(Clone, Debug, thiserror::Error)]
pub enum GeodesicError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("metric is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error(transparent)]
    Flow(#[from] Box<FlowError>),
    #[error("{0}")]
    Invalid(String),
}

impl From<crate::expr::EvalError> for GeodesicError {
    fn from(e: crate::expr::EvalError) -> Self {
        GeodesicError::Calc(e.into())
    }
}

impl From<FlowError> for GeodesicError {
    fn from(e: FlowError) -> Self {
        GeodesicError::Flow(Box::new(e))
    }
}

/// Symmetric matrix of coefficient expressions `g_ij`.
#[derive(Clone, Debug)]
pub struct Metric {
    chart: Arc<Chart>,
    g: Vec<Vec<Expression>>,
}

/// `Γ^k_ij` at a point, stored as `gamma[k][i][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelTensor {
    pub point: Vec<f64>,
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl Metric {
    /// From the upper triangle, row by row: `g₁₁, g₁₂, …, g₂₂, …`.
    pub fn from_upper(chart: &Arc<Chart>, upper: Vec<Expression>) -> Result<Self, GeodesicError> {
        let n = chart.dim();
        if upper.len() != n * (n + 1) / 2 {
            return Err(GeodesicError::Invalid(format!(
                "a metric on {n} coordinates needs {} upper-triangle entries",
                n * (n + 1) / 2
            )));
        }
        if upper.iter().any(|e| e.dim() != n) {
            return Err(CalcError::ChartMismatch.into());
        }
        let mut g = vec![vec![chart.constant(0.0); n]; n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i..n {
                let e = it.next().expect("counted");
                g[i][j] = e.clone();
                g[j][i] = e;
            }
        }
        Ok(Metric {
            chart: chart.clone(),
            g,
        })
    }

    pub fn parse_upper(chart: &Arc<Chart>, srcs: &[&str]) -> Result<Self, GeodesicError> {
        let e = srcs
            .iter()
            .map(|s| chart.parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_upper(chart, e)
    }

    pub fn diagonal(chart: &Arc<Chart>, diag: Vec<Expression>) -> Result<Self, GeodesicError> {
        let n = chart.dim();
        if diag.len() != n {
            return Err(GeodesicError::Invalid("diagonal length mismatch".into()));
        }
        let mut upper = Vec::new();
        for (i, d) in diag.into_iter().enumerate() {
            upper.push(d);
            for _ in i + 1..n {
                upper.push(chart.constant(0.0));
            }
        }
        Self::from_upper(chart, upper)
    }

    pub fn euclidean(chart: &Arc<Chart>) -> Self {
        let d = (0..chart.dim()).map(|_| chart.constant(1.0)).collect();
        Self::diagonal(chart, d).expect("square")
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.g[i][j]
    }

    /// `F*g`: `(F*g)_ab = g_ij(F) ∂_a Fⁱ ∂_b Fʲ`.
    pub fn pullback(&self, f: &ChartMap) -> Result<Metric, GeodesicError> {
        if **f.target() != *self.chart {
            return Err(CalcError::ChartMismatch.into());
        }
        let m = f.source().dim();
        let n = self.dim();
        let jac = f.jacobian_exprs();
        let comp: Vec<Vec<Expression>> = self
            .g
            .iter()
            .map(|row| row.iter().map(|e| e.compose(f.components())).collect())
            .collect();
        let mut upper = Vec::new();
        for a in 0..m {
            for b in a..m {
                let mut acc = f.source().constant(0.0);
                for i in 0..n {
                    for j in 0..n {
                        if comp[i][j].is_zero() {
                            continue;
                        }
                        acc = acc.add(&comp[i][j].mul(&jac[i][a]).mul(&jac[j][b]));
                    }
                }
                upper.push(acc);
            }
        }
        Metric::from_upper(f.source(), upper)
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>, GeodesicError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.g[i][j].eval(x)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// `g_ij` and `∂_l g_ij` (as `dg[l][(i, j)]`).
    pub fn eval_with_derivatives(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), GeodesicError> {
        let n = self.dim();
        let jets = Jet::point(x);
        let mut g = DMatrix::zeros(n, n);
        let mut dg = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in i..n {
                let v: Jet = self.g[i][j].eval_num(&jets)?;
                g[(i, j)] = v.v;
                g[(j, i)] = v.v;
                for (l, d) in v.partials().iter().enumerate() {
                    dg[l][(i, j)] = *d;
                    dg[l][(j, i)] = *d;
                }
            }
        }
        Ok((g, dg))
    }

    /// `g(u, v)` at `x`.
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64, GeodesicError> {
        let g = self.eval(x)?;
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g[(i, j)] * u[i] * v[j];
            }
        }
        Ok(s)
    }

    /// Smallest eigenvalue over the grid points in the chart domain.
    pub fn min_eigenvalue(&self, grid: &Grid) -> Result<f64, GeodesicError> {
        let mut min = f64::INFINITY;
        for p in grid.points() {
            if !self.chart.contains(&p) {
                continue;
            }
            let e = SymmetricEigen::new(self.eval(&p)?).eigenvalues.min();
            min = min.min(e);
        }
        Ok(min)
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<ChristoffelTensor, GeodesicError> {
        let (g, dg) = self.eval_with_derivatives(x)?;
        let gamma = christoffel_from(&g, &dg).ok_or_else(|| GeodesicError::Singular(x.to_vec()))?;
        Ok(ChristoffelTensor {
            point: x.to_vec(),
            gamma,
        })
    }

    /// Flow of `q̇ = v, v̇ᵏ = -Γᵏᵢⱼ vⁱ vʲ` on the chart `(q, v)`.
    pub fn geodesic_field(&self) -> GeodesicField {
        let base = &self.chart;
        let mut names: Vec<String> = base.coords().iter().cloned().collect();
        names.extend(base.coords().iter().map(|c| format!("d{c}")));
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut bounds = base.bounds.clone();
        bounds.extend(vec![(f64::NEG_INFINITY, f64::INFINITY); base.dim()]);
        let mut chart = Chart::new(&format!("T {}", base.name), &refs, &bounds).expect("valid");
        for (i, p) in base.periods.iter().enumerate() {
            if let Some(p) = p {
                chart = chart.periodic(i, base.bounds[i].0, *p);
            }
        }
        GeodesicField {
            metric: self.clone(),
            chart,
        }
    }

    /// Coframe coefficients `(L₁₁, L₂₁, L₂₂)` of `g = θ¹⊗θ¹ + θ²⊗θ²` with
    /// `θ¹ = L₁₁dq¹ + L₂₁dq²`, `θ² = L₂₂dq²`.
    fn coframe_exprs(&self) -> [Expression; 3] {
        let (g11, g12, g22) = (&self.g[0][0], &self.g[0][1], &self.g[1][1]);
        let s11 = g11.call(Func::Sqrt);
        let l21 = g12.div(&s11);
        let l22 = g22.sub(&g12.mul(g12).div(g11)).call(Func::Sqrt);
        [s11, l21, l22]
    }

    /// Unit covector at `q` for fiber angle `ψ`.
    pub fn unit_covector(&self, q: &[f64], psi: f64) -> Result<[f64; 2], GeodesicError> {
        let g = self.eval(q)?;
        let l11 = g[(0, 0)].sqrt();
        let l21 = g[(0, 1)] / l11;
        let l22 = (g[(1, 1)] - g[(0, 1)] * g[(0, 1)] / g[(0, 0)]).sqrt();
        Ok([psi.cos() * l11, psi.cos() * l21 + psi.sin() * l22])
    }

    /// `g⁻¹ p`.
    pub fn raise(&self, q: &[f64], p: &[f64]) -> Result<Vec<f64>, GeodesicError> {
        let g = self.eval(q)?;
        let inv = g.try_inverse().ok_or_else(|| GeodesicError::Singular(q.to_vec()))?;
        Ok((0..p.len())
            .map(|i| (0..p.len()).map(|j| inv[(i, j)] * p[j]).sum())
            .collect())
    }

    /// `α = p₁ dq¹ + p₂ dq²` on `(q¹, q², ψ)` with `p = cos ψ θ¹ + sin ψ θ²`,
    /// so `|p|_g = 1` identically.
    pub fn liouville_unit_form(&self) -> Result<ContactStructure, GeodesicError> {
        if self.dim() != 2 {
            return Err(GeodesicError::Invalid(
                "the unit cotangent form needs a 2-dimensional base".into(),
            ));
        }
        let base = &self.chart;
        let mut names = base.coord_names();
        names.push("ψ");
        let mut bounds = base.bounds.clone();
        bounds.push((0.0, 2.0 * PI));
        let mut chart = Chart::new(&format!("ST* {}", base.name), &names, &bounds)?;
        for (i, p) in base.periods.iter().enumerate() {
            if let Some(p) = p {
                chart = chart.periodic(i, base.bounds[i].0, *p);
            }
        }
        let chart = Arc::new(chart.angle(2));
        let lift = [chart.var(0), chart.var(1)];
        let [l11, l21, l22] = self.coframe_exprs().map(|e| e.compose(&lift));
        let (c, s) = (chart.var(2).call(Func::Cos), chart.var(2).call(Func::Sin));
        let p1 = c.mul(&l11);
        let p2 = c.mul(&l21).add(&s.mul(&l22));
        let alpha = DifferentialForm::one_form(&chart, vec![p1, p2, chart.constant(0.0)])?;
        ContactStructure::new(alpha).map_err(|e| GeodesicError::Invalid(e.to_string()))
    }
    /// For `h₁(ρ)dρ² + h₂(ρ)dθ²`, the metric `dσ² + h̃(σ)dθ²` obtained by
    /// following the unit radial field, `dρ/dσ = 1/√h₁`, from `ρ = 0`.
    /// The coefficients must not depend on the second coordinate.
    pub fn radial_reparam(&self, sigma_max: f64) -> Result<(Metric, Arc<RadialProfile>), GeodesicError> {
        if self.dim() != 2 || !self.g[0][1].is_zero() {
            return Err(GeodesicError::Invalid(
                "radial reparametrisation needs a diagonal 2-dimensional metric".into(),
            ));
        }
        let profile = Arc::new(RadialProfile::new(&self.g[0][0], &self.g[1][1], sigma_max)?);
        let base = &self.chart;
        let mut names = base.coord_names();
        names[0] = "σ";
        let mut bounds = base.bounds.clone();
        bounds[0] = (bounds[0].0, sigma_max);
        let mut chart = Chart::new(&format!("{} (arclength)", base.name), &names, &bounds)?;
        if let Some(p) = base.periods[1] {
            chart = chart.periodic(1, base.bounds[1].0, p);
        }
        let chart = Arc::new(chart);
        let h = Expression::opaque(profile.clone(), &[chart.var(0)]);
        let m = Metric::from_upper(&chart, vec![chart.constant(1.0), chart.constant(0.0), h])?;
        Ok((m, profile))
    }
}

/// Cached solution `ρ(σ)` of `dρ/dσ = 1/√h₁(ρ)`, `ρ(0) = 0`, and `h̃ = h₂ ∘ ρ`.
#[derive(Debug)]
pub struct RadialProfile {
    rho: Trajectory,
    h1: Expression,
    h2: Expression,
    sigma_max: f64,
}

impl RadialProfile {
    fn new(h1: &Expression, h2: &Expression, sigma_max: f64) -> Result<Self, GeodesicError> {
        let line = Arc::new(Chart::euclidean("ρ", &["ρ"]));
        let lift = [line.var(0), line.constant(0.0)];
        let (h1, h2) = (h1.compose(&lift), h2.compose(&lift));
        let x = VectorField::new(&line, vec![line.constant(1.0).div(&h1.call(Func::Sqrt))])?;
        let rho = integrate(&x, &[0.0], sigma_max, &IntegrateOptions::tol(1e-13))?;
        Ok(RadialProfile {
            rho,
            h1,
            h2,
            sigma_max,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn rho(&self, sigma: f64) -> Result<f64, String> {
        if !(0.0..=self.sigma_max).contains(&sigma) {
            return Err(format!("σ = {sigma} outside the cached range [0, {}]", self.sigma_max));
        }
        Ok(self.rho.eval(sigma)[0])
    }

    /// `h̃(σ)`.
    pub fn h_tilde(&self, sigma: f64) -> Result<f64, String> {
        let r = self.rho(sigma)?;
        self.h2.eval(&[r]).map_err(|e| e.to_string())
    }
}

impl OpaqueFn for RadialProfile {
    fn arity(&self) -> usize {
        1
    }

    fn value(&self, args: &[f64]) -> Result<f64, String> {
        self.h_tilde(args[0])
    }

    fn gradient(&self, args: &[f64]) -> Option<Vec<f64>> {
        let r = self.rho(args[0]).ok()?;
        let d2 = self.h2.gradient(&[r]).ok()?[0];
        let h1 = self.h1.eval(&[r]).ok()?;
        Some(vec![d2 / h1.sqrt()])
    }

    fn name(&self) -> &str {
        "h̃"
    }
}

fn christoffel_from(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Option<Vec<Vec<Vec<f64>>>> {
    let n = g.nrows();
    let inv = g.clone().try_inverse()?;
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma[k][i][j] = 0.5 * s;
                gamma[k][j][i] = 0.5 * s;
            }
        }
    }
    Some(gamma)
}

#[derive(Clone, Debug)]
pub struct GeodesicField {
    metric: Metric,
    chart: Chart,
}

impl GeodesicField {
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// `g(v, v)` at a phase-space state.
    pub fn speed_squared(&self, state: &[f64]) -> Result<f64, GeodesicError> {
        let n = self.metric.dim();
        self.metric.inner(&state[..n], &state[n..], &state[n..])
    }
}

impl Field for GeodesicField {
    fn chart(&self) -> &Chart {
        &self.chart
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        let n = self.metric.dim();
        let (q, v) = x.split_at(n);
        let (g, dg) = self
            .metric
            .eval_with_derivatives(q)
            .map_err(|e| FieldError::Other(e.to_string()))?;
        let gamma = christoffel_from(&g, &dg).ok_or_else(|| FieldError::Degenerate(x.to_vec()))?;
        out[..n].copy_from_slice(v);
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gamma[k][i][j] * v[i] * v[j];
                }
            }
            out[n + k] = -s;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CogeodesicComparison {
    pub base_point: Vec<f64>,
    pub psi: f64,
    pub time: f64,
    pub tol: f64,
    /// Largest base-point distance between the two flows over the samples.
    pub max_deviation: f64,
    pub samples: usize,
}

/// Integrate the Reeb flow of the Liouville unit form and the geodesic flow
/// with the dual initial velocity, and compare their base projections.
pub fn cogeodesic_reeb_compare(
    g: &Metric,
    q0: &[f64],
    psi: f64,
    time: f64,
    tol: f64,
) -> Result<CogeodesicComparison, GeodesicError> {
    let cs = Arc::new(g.liouville_unit_form()?);
    let reeb = cs.reeb_field();
    let geo = g.geodesic_field();
    let p = g.unit_covector(q0, psi)?;
    let v0 = g.raise(q0, &p)?;
    let opts = IntegrateOptions::tol(tol);
    let a = integrate(&reeb, &[q0[0], q0[1], psi], time, &opts)?;
    let b = integrate(&geo, &[q0[0], q0[1], v0[0], v0[1]], time, &opts)?;
    let samples = 2000;
    let mut max_dev: f64 = 0.0;
    for i in 0..=samples {
        let t = time * i as f64 / samples as f64;
        let ya = a.eval(t);
        let yb = b.eval(t);
        max_dev = max_dev.max(g.chart().distance(&ya[..2], &yb[..2]));
    }
    Ok(CogeodesicComparison {
        base_point: q0.to_vec(),
        psi,
        time,
        tol,
        max_deviation: max_dev,
        samples: samples + 1,
    })
}
