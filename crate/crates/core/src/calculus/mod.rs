//! Exterior calculus on a single coordinate chart.

mod chart;
mod field;
mod form;
mod map;
mod quadrature;

pub use chart::Chart;
pub use field::VectorField;
pub use form::{combinations, det_by, perm_sign, DifferentialForm};
pub use map::ChartMap;
pub use quadrature::{gauss_legendre, integrate_form, integrate_line, Rule};

use crate::expr::{EvalError, ParseError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CalcError {
    #[error("objects live on different charts")]
    ChartMismatch,
    #[error("degree {0} does not fit (limit {1})")]
    Degree(usize, usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("image {image:?} of {point:?} leaves the target domain ({face})")]
    ImageOutside {
        point: Vec<f64>,
        image: Vec<f64>,
        face: String,
    },
    #[error("{0}")]
    Invalid(String),
}
