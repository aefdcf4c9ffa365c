use std::sync::Arc;

use crate::expr::{Expression, Jet, Num};

use super::{CalcError, Chart};

/// A smooth map between charts, given by target-coordinate expressions in the
/// source coordinates.
#[derive(Clone, Debug)]
pub struct ChartMap {
    source: Arc<Chart>,
    target: Arc<Chart>,
    components: Vec<Expression>,
}

impl ChartMap {
    pub fn new(
        source: &Arc<Chart>,
        target: &Arc<Chart>,
        components: Vec<Expression>,
    ) -> Result<Self, CalcError> {
        if components.len() != target.dim() {
            return Err(CalcError::Invalid(format!(
                "map into `{}` needs {} components, got {}",
                target.name,
                target.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.dim() != source.dim()) {
            return Err(CalcError::ChartMismatch);
        }
        Ok(ChartMap {
            source: source.clone(),
            target: target.clone(),
            components,
        })
    }

    /// Parse component expressions over the source coordinates.
    pub fn parse(source: &Arc<Chart>, target: &Arc<Chart>, srcs: &[&str]) -> Result<Self, CalcError> {
        let comps = srcs
            .iter()
            .map(|s| source.parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(source, target, comps)
    }

    pub fn identity(chart: &Arc<Chart>) -> Self {
        let comps = (0..chart.dim()).map(|i| chart.var(i)).collect();
        ChartMap {
            source: chart.clone(),
            target: chart.clone(),
            components: comps,
        }
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &ChartMap) -> Result<ChartMap, CalcError> {
        if *other.source != *self.target {
            return Err(CalcError::ChartMismatch);
        }
        let comps = other
            .components
            .iter()
            .map(|c| c.compose(&self.components))
            .collect();
        ChartMap::new(&self.source, &other.target, comps)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, CalcError> {
        self.components
            .iter()
            .map(|c| Ok(c.eval(x)?))
            .collect()
    }

    /// Image point and Jacobian rows `∂Fⁱ/∂xᵃ`.
    pub fn eval_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), CalcError> {
        let jets = Jet::point(x);
        let mut y = Vec::with_capacity(self.components.len());
        let mut jac = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let j: Jet = c.eval_num(&jets)?;
            y.push(j.re());
            jac.push(j.partials().to_vec());
        }
        Ok((y, jac))
    }

    /// Jacobian entries as derivative expressions.
    pub fn jacobian_exprs(&self) -> Vec<Vec<Expression>> {
        self.components
            .iter()
            .map(|c| (0..self.source.dim()).map(|a| c.partial(a)).collect())
            .collect()
    }

    /// Evaluate on an `n`-per-axis grid of the source domain (infinite bounds
    /// clipped to ±1) and check each image against the target domain.
    pub fn check_image(&self, n: usize) -> Result<(), CalcError> {
        let lo: Vec<f64> = self.source.bounds.iter().map(|b| b.0.max(-1.0)).collect();
        let hi: Vec<f64> = self.source.bounds.iter().map(|b| b.1.min(1.0)).collect();
        let grid = crate::sampling::Grid::uniform(&lo, &hi, n);
        for x in grid.points() {
            if !self.source.contains(&x) {
                continue;
            }
            let y = self.eval(&x)?;
            if !self.target.contains(&y) {
                let face = self.target.face(&y);
                return Err(CalcError::ImageOutside {
                    point: x,
                    image: y,
                    face,
                });
            }
        }
        Ok(())
    }
}
