//! Shared value types for the mean-field LQ solvers: matrix-valued time
//! functions, problem data, partitions, two-parameter fields and piecewise
//! feedback gains.

mod error;
mod field;
mod func;
mod gain;
mod grid;
pub mod json;
pub mod linalg;
mod problem;

pub use error::{MflqError, RefinementRow, Result};
pub use field::TwoParamMatrixField;
pub use func::{Discount, MatrixFn, TwoTimeMatrixFn};
pub use gain::PiecewiseGain;
pub use grid::TimeGrid;
pub use linalg::Mat;
pub use problem::{hat, validate, HatCoefficients, ProblemData, ValidationReport, Violation};
