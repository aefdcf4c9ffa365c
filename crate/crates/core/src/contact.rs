//! Contact condition, Reeb fields on 3-dimensional leaf charts, and the
//! energy functionals of maps into the symplectisation.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{integrate_form, integrate_line, CalcError, Chart, ChartMap, DifferentialForm, Rule};
use crate::expr::{Expression, Func, Jet};
use crate::flow::{Field, FieldError};
use crate::par::{self, Execution};
use crate::sampling::Grid;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ContactError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("α(k) = 0 at {0:?}: not contact there")]
    Degenerate(Vec<f64>),
    #[error("{point:?} lies outside the chart ({face})")]
    Outside { point: Vec<f64>, face: String },
    #[error("{0}")]
    Invalid(String),
}

impl From<crate::expr::EvalError> for ContactError {
    fn from(e: crate::expr::EvalError) -> Self {
        ContactError::Calc(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReebSample {
    pub point: Vec<f64>,
    pub r: [f64; 3],
    /// `|α(R) - 1|`
    pub alpha_residual: f64,
    /// `sup_i |dα(R, e_i)|`
    pub kernel_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub min_abs_volume: f64,
    pub argmin: Vec<f64>,
    pub samples: usize,
    /// Points outside the validity domain, not counted.
    pub skipped: usize,
    /// +1 or -1 when the volume keeps one sign, 0 if it changes sign.
    pub sign: i8,
    pub eps: f64,
    pub pass: bool,
}

/// A 1-form on a 3-dimensional leaf chart, with transverse parameters
/// already substituted into its coefficients.
#[derive(Clone, Debug)]
pub struct ContactStructure {
    alpha: DifferentialForm,
    dalpha: DifferentialForm,
    pub params: BTreeMap<String, f64>,
    pub eps_contact: f64,
}

pub type Mat3 = [[f64; 3]; 3];

impl ContactStructure {
    pub fn new(alpha: DifferentialForm) -> Result<Self, ContactError> {
        if alpha.degree() != 1 || alpha.chart().dim() != 3 {
            return Err(ContactError::Invalid(
                "a contact form here is a 1-form on a 3-dimensional chart".into(),
            ));
        }
        let dalpha = alpha.d();
        Ok(ContactStructure {
            alpha,
            dalpha,
            params: BTreeMap::new(),
            eps_contact: 1e-8,
        })
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.alpha.chart()
    }

    pub fn alpha(&self) -> &DifferentialForm {
        &self.alpha
    }

    pub fn dalpha(&self) -> &DifferentialForm {
        &self.dalpha
    }

    /// `αᵢ` and `A_ij = dα(eᵢ, eⱼ)` at a point.
    pub fn alpha_at(&self, x: &[f64]) -> Result<([f64; 3], Mat3), ContactError> {
        let jets = Jet::point(x);
        let mut a = [0.0; 3];
        let mut g = [[0.0; 3]; 3];
        for (idx, c) in self.alpha.terms() {
            let j: Jet = c.eval_num(&jets)?;
            let i = idx[0];
            a[i] = j.v;
            g[i].copy_from_slice(j.partials());
        }
        // g[i][j] = ∂ⱼ αᵢ ; A_ij = ∂ᵢ αⱼ − ∂ⱼ αᵢ
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = g[j][i] - g[i][j];
            }
        }
        Ok((a, m))
    }

    /// `(α ∧ dα)(e₁, e₂, e₃)`.
    pub fn contact_volume(&self, x: &[f64]) -> Result<f64, ContactError> {
        let (a, m) = self.alpha_at(x)?;
        let k = kernel(&m);
        Ok(dot(&a, &k))
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), ContactError> {
        match self.chart().violation(x) {
            None => Ok(()),
            Some(_) => Err(ContactError::Outside {
                point: x.to_vec(),
                face: self.chart().face(x),
            }),
        }
    }

    /// Reeb vector from the kernel of the antisymmetric matrix of `dα`.
    pub fn reeb_at(&self, x: &[f64]) -> Result<ReebSample, ContactError> {
        self.check_domain(x)?;
        let (a, m) = self.alpha_at(x)?;
        let r = reeb_from(&a, &m).ok_or_else(|| ContactError::Degenerate(x.to_vec()))?;
        let kernel_residual = (0..3)
            .map(|i| (0..3).map(|j| r[j] * m[j][i]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        Ok(ReebSample {
            point: x.to_vec(),
            r,
            alpha_residual: (dot(&a, &r) - 1.0).abs(),
            kernel_residual,
        })
    }

    /// The same construction in the frame `b` (rows are basis vectors in chart
    /// components); the result is returned in chart components.
    pub fn reeb_in_basis(&self, x: &[f64], b: &Mat3) -> Result<[f64; 3], ContactError> {
        let (a, m) = self.alpha_at(x)?;
        let mut ab = [0.0; 3];
        let mut mb = [[0.0; 3]; 3];
        for p in 0..3 {
            ab[p] = dot(&a, &b[p]);
            for q in 0..3 {
                mb[p][q] = (0..3)
                    .map(|i| (0..3).map(|j| b[p][i] * m[i][j] * b[q][j]).sum::<f64>())
                    .sum();
            }
        }
        let rb = reeb_from(&ab, &mb).ok_or_else(|| ContactError::Degenerate(x.to_vec()))?;
        let mut r = [0.0; 3];
        for p in 0..3 {
            for i in 0..3 {
                r[i] += rb[p] * b[p][i];
            }
        }
        Ok(r)
    }

    /// Minimum of `|α ∧ dα|` over the grid points inside the chart domain.
    pub fn verify_contact(&self, grid: &Grid, exec: Execution) -> ContactReport {
        let pts = grid.points();
        let vols = par::map(exec, &pts, |p| {
            if !self.chart().contains(p) {
                return None;
            }
            Some(self.contact_volume(p).unwrap_or(f64::NAN))
        });
        let mut min = f64::INFINITY;
        let mut argmin = Vec::new();
        let (mut pos, mut neg, mut skipped, mut samples) = (false, false, 0, 0);
        for (p, v) in pts.iter().zip(vols) {
            let Some(v) = v else {
                skipped += 1;
                continue;
            };
            samples += 1;
            let abs = if v.is_nan() { 0.0 } else { v.abs() };
            pos |= v > 0.0;
            neg |= v < 0.0;
            if abs < min || argmin.is_empty() {
                min = abs;
                argmin = p.clone();
            }
        }
        let sign = match (pos, neg) {
            (true, false) => 1,
            (false, true) => -1,
            _ => 0,
        };
        let pass = samples > 0 && sign != 0 && min >= self.eps_contact;
        ContactReport {
            min_abs_volume: if samples == 0 { 0.0 } else { min },
            argmin,
            samples,
            skipped,
            sign,
            eps: self.eps_contact,
            pass,
        }
    }

    pub fn reeb_field(self: &Arc<Self>) -> ReebField {
        ReebField { cs: self.clone() }
    }

    /// Chart `(a, x¹, x², x³)` of `ℝ × M` and the projection onto `M`.
    pub fn symplectisation(&self) -> (Arc<Chart>, ChartMap) {
        let leaf = self.chart();
        let mut names = vec!["a"];
        names.extend(leaf.coord_names());
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY)];
        bounds.extend(leaf.bounds.iter().copied());
        let mut chart = Chart::new(&format!("R x {}", leaf.name), &names, &bounds)
            .expect("valid product chart");
        for (i, p) in leaf.periods.iter().enumerate() {
            if let Some(p) = p {
                chart = chart.periodic(i + 1, leaf.bounds[i].0, *p);
            }
        }
        let chart = Arc::new(chart);
        let comps = (1..4).map(|i| chart.var(i)).collect();
        let proj = ChartMap::new(&chart, leaf, comps).expect("projection");
        (chart, proj)
    }

    /// `d(eᵃ α)` on the symplectisation chart.
    pub fn symplectisation_form(&self) -> Result<DifferentialForm, ContactError> {
        let (chart, proj) = self.symplectisation();
        let pulled = self.alpha.pullback(&proj)?;
        let ea = chart.var(0).call(Func::Exp);
        Ok(pulled.times(&ea).d())
    }

    fn to_leaf(&self, f: &ChartMap) -> Result<ChartMap, ContactError> {
        if **f.target() == **self.chart() {
            return Ok(f.clone());
        }
        let (chart, proj) = self.symplectisation();
        if **f.target() == *chart {
            return Ok(f.then(&proj)?);
        }
        Err(CalcError::ChartMismatch.into())
    }

    /// `E^h(F) = ∫ F* dα` for a map into the leaf chart or into `ℝ × leaf`.
    pub fn horizontal_energy(&self, f: &ChartMap, rule: Rule) -> Result<f64, ContactError> {
        let f = self.to_leaf(f)?;
        Ok(integrate_form(&f, &self.dalpha, rule)?)
    }

    /// `∮ loop* α` for a closed loop parameterized by a periodic 1-chart.
    pub fn boundary_energy(&self, lp: &ChartMap, rule: Rule) -> Result<f64, ContactError> {
        let lp = self.to_leaf(lp)?;
        let src = lp.source();
        if src.dim() != 1 {
            return Err(ContactError::Invalid("loop source must be 1-dimensional".into()));
        }
        let (lo, hi) = src.bounds[0];
        let a = lp.eval(&[lo])?;
        let b = lp.eval(&[hi])?;
        let gap = self.chart().distance(&a, &b);
        if !(gap <= 1e-12) {
            return Err(ContactError::Invalid(format!(
                "loop is not closed: endpoints differ by {gap:e}"
            )));
        }
        Ok(integrate_line(&lp, &self.alpha, rule)?)
    }

    /// Constant-substituted coefficient expressions, in chart order.
    pub fn coefficients(&self) -> Vec<Expression> {
        self.alpha.components()
    }
}

/// `(A₂₃, −A₁₃, A₁₂)` spans the kernel of an antisymmetric 3×3 matrix.
pub fn kernel(m: &Mat3) -> [f64; 3] {
    [m[1][2], -m[0][2], m[0][1]]
}

fn reeb_from(a: &[f64; 3], m: &Mat3) -> Option<[f64; 3]> {
    let k = kernel(m);
    let ak = dot(a, &k);
    if ak == 0.0 || !ak.is_finite() {
        return None;
    }
    Some([k[0] / ak, k[1] / ak, k[2] / ak])
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The Reeb vector field as a flow field.
#[derive(Clone, Debug)]
pub struct ReebField {
    cs: Arc<ContactStructure>,
}

impl ReebField {
    pub fn structure(&self) -> &Arc<ContactStructure> {
        &self.cs
    }
}

impl Field for ReebField {
    fn chart(&self) -> &Chart {
        self.cs.chart()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        let (a, m) = self.cs.alpha_at(x).map_err(FieldError::from_contact)?;
        let r = reeb_from(&a, &m).ok_or_else(|| FieldError::Degenerate(x.to_vec()))?;
        out.copy_from_slice(&r);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tight() -> ContactStructure {
        let c = Arc::new(Chart::euclidean("r3", &["x", "y", "z"]));
        let a = DifferentialForm::one_form(
            &c,
            vec![c.constant(0.0), c.parse("-x").unwrap(), c.constant(1.0)],
        )
        .unwrap();
        ContactStructure::new(a).unwrap()
    }

    fn ot() -> ContactStructure {
        let c = Arc::new(
            Chart::new("cyl", &["r", "θ", "z"], &[(1e-6, 10.0), (0.0, 1.0), (-6.0, 6.0)])
                .unwrap()
                .angle(1),
        );
        let a = DifferentialForm::one_form(
            &c,
            vec![c.constant(0.0), c.parse("r*sin(r)").unwrap(), c.parse("cos(r)").unwrap()],
        )
        .unwrap();
        ContactStructure::new(a).unwrap()
    }

    #[test]
    fn tight_volume_and_reeb() {
        let cs = tight();
        assert_eq!(cs.contact_volume(&[0.4, -1.0, 2.0]).unwrap(), -1.0);
        let r = cs.reeb_at(&[0.4, -1.0, 2.0]).unwrap();
        assert_eq!(r.r, [0.0, 0.0, 1.0]);
        let g = Grid::uniform(&[-1.0; 3], &[1.0; 3], 20);
        let rep = cs.verify_contact(&g, Execution::Sequential);
        assert!(rep.pass);
        assert_eq!(rep.min_abs_volume, 1.0);
        assert_eq!(rep.samples, 8000);
    }

    #[test]
    fn closed_form_fails() {
        let c = Arc::new(Chart::euclidean("r3", &["x", "y", "z"]));
        let a = DifferentialForm::basis(&c, &[2]).unwrap();
        let cs = ContactStructure::new(a).unwrap();
        assert_eq!(cs.contact_volume(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let rep = cs.verify_contact(&Grid::uniform(&[-1.0; 3], &[1.0; 3], 4), Execution::Sequential);
        assert!(!rep.pass);
        assert_eq!(rep.min_abs_volume, 0.0);
        assert!(matches!(cs.reeb_at(&[0.0; 3]), Err(ContactError::Degenerate(_))));
    }

    #[test]
    fn scaled_basis_gives_same_reeb() {
        let cs = ot();
        let x = [1.3, 0.2, 0.5];
        let r = cs.reeb_at(&x).unwrap().r;
        let b = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let rb = cs.reeb_in_basis(&x, &b).unwrap();
        for i in 0..3 {
            assert!((r[i] - rb[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_energy_of_loops() {
        let cs = ot();
        let circle = Arc::new(Chart::new("S1", &["u"], &[(0.0, 1.0)]).unwrap().angle(0));
        for (rad, want) in [(PI / 2.0, PI * PI), (PI, 0.0)] {
            let lp = ChartMap::parse(&circle, cs.chart(), &[&format!("{rad:?}"), "u", "0"]).unwrap();
            let e = cs.boundary_energy(&lp, Rule::default()).unwrap();
            assert!((e - want).abs() < 1e-9, "{e} vs {want}");
        }
        let open = Arc::new(Chart::new("I", &["u"], &[(0.0, 1.0)]).unwrap());
        let lp = ChartMap::parse(&open, cs.chart(), &["1 + u", "0", "0"]).unwrap();
        assert!(cs.boundary_energy(&lp, Rule::default()).is_err());
    }

    #[test]
    fn symplectisation_form_is_closed_and_nondegenerate() {
        let cs = tight();
        let w = cs.symplectisation_form().unwrap();
        let ww = w.wedge(&w).unwrap();
        let v = ww.coeff(&[0, 1, 2, 3]).unwrap().eval(&[0.3, 0.1, 0.2, 0.4]).unwrap();
        // ω∧ω = 2 e^{2a} da∧α∧dα
        assert!((v - 2.0 * (0.6f64).exp() * -1.0).abs() < 1e-12);
        let dw = w.d();
        for (_, c) in dw.eval_coeffs(&[0.3, 0.1, 0.2, 0.4]).unwrap() {
            assert!(c.abs() < 1e-12);
        }
    }
}
