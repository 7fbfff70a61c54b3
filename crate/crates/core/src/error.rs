use thiserror::Error;

use crate::expr::{EvalError, ParseError, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation failed at {point}: {source}")]
    Eval { point: Point, source: EvalError },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("objects live on different charts")]
    ChartMismatch,

    #[error("form degree {0} exceeds the supported maximum of 3")]
    DegreeOverflow(usize),

    #[error("expected a form of degree {expected}, found degree {found}")]
    WrongDegree { expected: usize, found: usize },

    #[error("invalid index tuple {0:?}")]
    InvalidTuple(Vec<usize>),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("base index {index} out of range (system has {count} base coordinates)")]
    BaseIndex { index: usize, count: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid gauge transform: {0}")]
    Gauge(String),

    #[error("invalid curve: {0}")]
    Curve(String),

    #[error("curve is not closed in the base (endpoint gap {gap:e})")]
    NotClosed { gap: f64 },

    #[error("integration failed at t = {t}: {source}")]
    Integration { t: f64, source: Box<Error> },

    #[error("step refinement did not converge after {halvings} halvings (last difference {difference:e})")]
    NoConvergence { halvings: usize, difference: f64 },

    #[error("degenerate entropy normalisation at {point}: dS/dU = {derivative:e}")]
    DegenerateEntropy { point: Point, derivative: f64 },

    #[error("operation needs {needed}: {reason}")]
    Unsupported {
        needed: &'static str,
        reason: String,
    },
}

impl Error {
    pub(crate) fn eval(point: &Point, source: EvalError) -> Error {
        Error::Eval {
            point: point.clone(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
