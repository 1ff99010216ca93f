//! Encoded distributed optimization with straggler-tolerant gather.
//!
//! Data (or model) coordinates are spread redundantly across `m` workers
//! through a frame `S`. Each iteration the master waits for the fastest `k`
//! workers only and steps with what it has.

pub mod cluster;
pub mod error;
pub mod frames;
pub mod linalg;
pub mod loss;
pub mod scalar;
pub mod solvers;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Frame64 = frames::Frame<f64>;
pub type Frame32 = frames::Frame<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type DataProblem64 = loss::DataParallelProblem<f64>;
pub type DataProblem32 = loss::DataParallelProblem<f32>;
pub type ModelProblem64 = loss::ModelParallelProblem<f64>;
pub type ModelProblem32 = loss::ModelParallelProblem<f32>;
