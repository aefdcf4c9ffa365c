//! Sampled monotonicity certificates: `inf ∇W · X` over a grid.

use serde::{Deserialize, Serialize};

use crate::expr::Expression;
use crate::par::{self, Execution};
use crate::sampling::Grid;

use super::Field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub functional: String,
    pub region: Grid,
    /// Infimum of `dW(X)` over the samples; `-inf` if the field failed somewhere.
    pub margin: f64,
    pub argmin: Vec<f64>,
    pub samples: usize,
    /// Grid points outside the chart domain, not counted.
    pub skipped: usize,
    pub eps: f64,
    pub pass: bool,
}

impl CertificateReport {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Sample `dW(X)` on the grid points inside the chart. PASS iff the smallest
/// value is at least `eps`. This is a sampled check, not a proof.
pub fn certify_monotone<F: Field + ?Sized>(
    f: &F,
    w: &Expression,
    grid: &Grid,
    eps: f64,
    exec: Execution,
) -> Result<CertificateReport, String> {
    if grid.is_empty() {
        return Err("empty sampler".into());
    }
    let chart = f.chart();
    let vals = par::map_range(exec, grid.len(), |i| {
        let p = grid.point(i);
        if !chart.contains(&p) {
            return None;
        }
        let v = f
            .at(&p)
            .ok()
            .and_then(|x| w.eval_dual(&p, &x).ok())
            .map(|r| r.1)
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY);
        Some((p, v))
    });
    let mut margin = f64::INFINITY;
    let mut argmin = Vec::new();
    let (mut samples, mut skipped) = (0, 0);
    for v in vals {
        match v {
            None => skipped += 1,
            Some((p, v)) => {
                samples += 1;
                if v < margin || argmin.is_empty() {
                    margin = v;
                    argmin = p;
                }
            }
        }
    }
    if samples == 0 {
        return Err("no grid point lies in the chart domain".into());
    }
    Ok(CertificateReport {
        functional: w.to_string(),
        region: grid.clone(),
        margin,
        argmin,
        samples,
        skipped,
        eps,
        pass: margin >= eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Chart, VectorField};
    use std::sync::Arc;

    #[test]
    fn inward_field_fails_radius_certificate() {
        let c = Arc::new(
            Chart::new("cyl", &["r", "θ", "z"], &[(0.1, 2.0), (0.0, 1.0), (-1.0, 1.0)])
                .unwrap()
                .angle(1),
        );
        let x = VectorField::parse(&c, &["-1", "0", "0"]).unwrap();
        let g = Grid::uniform(&[0.5, 0.0, -1.0], &[1.5, 6.0, 1.0], 5);
        let rep = certify_monotone(&x, &c.parse("r").unwrap(), &g, 0.0, Execution::Sequential).unwrap();
        assert_eq!(rep.margin, -1.0);
        assert!(!rep.pass);
        let empty = Grid::new(vec![0.0; 3], vec![1.0; 3], vec![0, 1, 1]);
        assert!(certify_monotone(&x, &c.parse("r").unwrap(), &empty, 0.0, Execution::Sequential).is_err());
    }
}
