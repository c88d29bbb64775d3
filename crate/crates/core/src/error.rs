use core::fmt;

use crate::losses::LossReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform.
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// An operation produced NaN or an infinity.
    NonFinite { op: &'static str },
    /// A precondition on an argument was violated.
    Argument(&'static str),
    /// A non-finite gradient showed up while back-propagating through `layer`.
    Divergence { layer: usize },
    /// Training produced a non-finite loss or gradient.
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        last_finite: Option<LossReport>,
    },
    /// A fitness table does not describe the population it was used with.
    StaleFitness,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NonFinite { op } => write!(f, "non-finite value produced by {op}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Divergence { layer } => {
                write!(f, "non-finite gradient in layer {layer}")
            }
            Error::TrainingDiverged { epoch, batch, .. } => {
                write!(f, "training diverged at epoch {epoch}, batch {batch}")
            }
            Error::StaleFitness => f.write_str("fitness table does not match population"),
        }
    }
}

impl core::error::Error for Error {}
