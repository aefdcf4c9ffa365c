use std::sync::Arc;

use crate::expr::{Expression, Jet, Num};

use super::{CalcError, Chart};

#[derive(Clone, Debug)]
pub struct VectorField {
    chart: Arc<Chart>,
    components: Vec<Expression>,
}

impl VectorField {
    pub fn new(chart: &Arc<Chart>, components: Vec<Expression>) -> Result<Self, CalcError> {
        if components.len() != chart.dim() || components.iter().any(|c| c.dim() != chart.dim()) {
            return Err(CalcError::ChartMismatch);
        }
        Ok(VectorField {
            chart: chart.clone(),
            components,
        })
    }

    pub fn parse(chart: &Arc<Chart>, srcs: &[&str]) -> Result<Self, CalcError> {
        let comps = srcs
            .iter()
            .map(|s| chart.parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(chart, comps)
    }

    pub fn zero(chart: &Arc<Chart>) -> Self {
        let comps = (0..chart.dim()).map(|_| chart.constant(0.0)).collect();
        VectorField {
            chart: chart.clone(),
            components: comps,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, CalcError> {
        self.components.iter().map(|c| Ok(c.eval(x)?)).collect()
    }

    /// Components and their Jacobian `∂Xⁱ/∂xʲ`.
    pub fn eval_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), CalcError> {
        let jets = Jet::point(x);
        let mut v = Vec::new();
        let mut jac = Vec::new();
        for c in &self.components {
            let j: Jet = c.eval_num(&jets)?;
            v.push(j.re());
            jac.push(j.partials().to_vec());
        }
        Ok((v, jac))
    }

    /// Directional derivative `X(f)` at a point.
    pub fn apply(&self, f: &Expression, x: &[f64]) -> Result<f64, CalcError> {
        let v = self.eval(x)?;
        Ok(f.eval_dual(x, &v)?.1)
    }

    /// Lie bracket `[X, Y]` at a point.
    pub fn bracket_at(&self, y: &VectorField, x: &[f64]) -> Result<Vec<f64>, CalcError> {
        let (xv, xj) = self.eval_with_jacobian(x)?;
        let (yv, yj) = y.eval_with_jacobian(x)?;
        let n = xv.len();
        Ok((0..n)
            .map(|k| (0..n).map(|i| xv[i] * yj[k][i] - yv[i] * xj[k][i]).sum())
            .collect())
    }
}
