//! Dense tensors, recurrent cells, a recording tape for reverse-mode
//! gradients, and the Adadelta optimizer.

mod adadelta;
mod gradcheck;
mod gru;
mod loss;
mod params;
mod tape;
mod tensor;

pub use adadelta::{adadelta_update, Adadelta};
pub use gradcheck::{
    gradient_check, relative_error, CoordinateCheck, GradCheckOptions, GradCheckReport,
};
pub use gru::{gru_step, CellKind, GruParams, RecurrentCell};
pub use loss::softmax_cross_entropy;
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{dot, sigmoid, Tensor};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("backward called before any forward operation was recorded")]
    BackwardBeforeForward,
    #[error("loss node must be scalar, found length {0}")]
    NonScalarLoss(usize),
}
