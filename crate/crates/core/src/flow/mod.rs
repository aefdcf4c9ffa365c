//! Vector-field flows: integration, return maps, closed-orbit search and
//! monotonicity certificates.

mod certificate;
mod integrator;
mod orbits;
mod section;

pub use certificate::{certify_monotone, CertificateReport};
pub use integrator::{fmt17, integrate, integrate_with_events, DenseStep, Event, IntegrateOptions, Trajectory};
pub use orbits::{find_closed_orbits, ClosedOrbit, OrbitSearch, OrbitSearchReport};
pub use section::{return_map, EventSpec, ReturnOutcome, Section};

use crate::calculus::{CalcError, Chart, VectorField};
use crate::contact::ContactError;
use crate::expr::EvalError;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("field is degenerate at {0:?}")]
    Degenerate(Vec<f64>),
    #[error("{0}")]
    Other(String),
}

impl FieldError {
    pub(crate) fn from_contact(e: ContactError) -> Self {
        match e {
            ContactError::Calc(CalcError::Eval(e)) => FieldError::Eval(e),
            ContactError::Degenerate(p) => FieldError::Degenerate(p),
            other => FieldError::Other(other.to_string()),
        }
    }
}

impl From<CalcError> for FieldError {
    fn from(e: CalcError) -> Self {
        match e {
            CalcError::Eval(e) => FieldError::Eval(e),
            other => FieldError::Other(other.to_string()),
        }
    }
}

/// A smooth autonomous vector field on a chart.
pub trait Field: Send + Sync {
    fn chart(&self) -> &Chart;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError>;

    fn dim(&self) -> usize {
        self.chart().dim()
    }

    fn at(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let mut v = vec![0.0; self.dim()];
        self.eval(x, &mut v)?;
        Ok(v)
    }
}

impl Field for VectorField {
    fn chart(&self) -> &Chart {
        VectorField::chart(self)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        for (o, c) in out.iter_mut().zip(self.components()) {
            *o = c.eval(x)?;
        }
        Ok(())
    }
}

impl<F: Field + ?Sized> Field for std::sync::Arc<F> {
    fn chart(&self) -> &Chart {
        (**self).chart()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        (**self).eval(x, out)
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum FlowError {
    #[error("trajectory left the domain through {face} at t = {}", .trajectory.t_end())]
    DomainExit {
        trajectory: Box<Trajectory>,
        face: String,
    },
    #[error("step size underflow at t = {t}: {cause}")]
    StepUnderflow {
        trajectory: Box<Trajectory>,
        t: f64,
        cause: String,
    },
    #[error("step budget exhausted at t = {}", .trajectory.t_end())]
    MaxSteps { trajectory: Box<Trajectory> },
    #[error("invalid start {point:?}: {reason}")]
    InvalidStart { point: Vec<f64>, reason: String },
}

impl FlowError {
    /// The partial trajectory, when one exists.
    pub fn trajectory(&self) -> Option<&Trajectory> {
        match self {
            FlowError::DomainExit { trajectory, .. }
            | FlowError::StepUnderflow { trajectory, .. }
            | FlowError::MaxSteps { trajectory } => Some(trajectory),
            FlowError::InvalidStart { .. } => None,
        }
    }
}
