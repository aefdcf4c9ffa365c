//! Tensor-product sampling grids.

use serde::{Deserialize, Serialize};

/// A box with a per-axis node count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub layout: Layout,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Endpoints included: `lo + i (hi-lo)/(n-1)`.
    #[default]
    Inclusive,
    /// Spacing `(hi-lo)/n`, anchored so the box center is always a node:
    /// `c + (i - n/2) (hi-lo)/n` with integer division.
    Centered,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Self {
        assert!(lo.len() == hi.len() && lo.len() == n.len());
        Grid {
            lo,
            hi,
            n,
            layout: Layout::Inclusive,
        }
    }

    pub fn uniform(lo: &[f64], hi: &[f64], n: usize) -> Self {
        Grid::new(lo.to_vec(), hi.to_vec(), vec![n; lo.len()])
    }

    pub fn centered(mut self) -> Self {
        self.layout = Layout::Centered;
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axis(&self, k: usize, i: usize) -> f64 {
        let (lo, hi, n) = (self.lo[k], self.hi[k], self.n[k]);
        match self.layout {
            Layout::Inclusive if n == 1 => 0.5 * (lo + hi),
            Layout::Inclusive => lo + (hi - lo) * i as f64 / (n - 1) as f64,
            Layout::Centered => {
                0.5 * (lo + hi) + (hi - lo) * (i as f64 - (n / 2) as f64) / n as f64
            }
        }
    }

    /// The `idx`-th node in row-major order (last axis fastest).
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let d = self.dim();
        let mut p = vec![0.0; d];
        for k in (0..d).rev() {
            let i = idx % self.n[k];
            idx /= self.n[k];
            p[k] = self.axis(k, i);
        }
        p
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Parse `"6x6x6"`.
pub fn parse_counts(s: &str) -> Option<Vec<usize>> {
    s.split(['x', 'X'])
        .map(|t| t.trim().parse().ok().filter(|&n| n > 0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_hits_corners() {
        let g = Grid::uniform(&[0.0, -1.0], &[1.0, 1.0], 3);
        let pts = g.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, -1.0]);
        assert_eq!(pts[1], vec![0.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
    }

    #[test]
    fn centered_contains_center() {
        for n in [1, 4, 5, 6] {
            let g = Grid::uniform(&[0.0], &[2.0], n).centered();
            assert!(g.points().iter().any(|p| p[0] == 1.0), "n = {n}");
            assert!(g.points().iter().all(|p| (0.0..2.0).contains(&p[0])));
        }
    }

    #[test]
    fn counts() {
        assert_eq!(parse_counts("6x6x6"), Some(vec![6, 6, 6]));
        assert_eq!(parse_counts("6x0"), None);
        assert_eq!(parse_counts("ax2"), None);
    }
}
