//! Error-correlation diagnostics for forecasting models and
//! correlation-aware ensemble construction.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` or `f32` for callers
//! that do not need the generality.

pub mod contribution;
pub mod data;
pub mod ensemble;
mod error;
mod linalg;
mod num;
pub mod residuals;
pub mod skill;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
pub use num::Scalar;

pub type AlignedPanel64 = data::AlignedPanel<f64>;
pub type AlignedPanel32 = data::AlignedPanel<f32>;
pub type ResidualPanel64 = residuals::ResidualPanel<f64>;
pub type ResidualPanel32 = residuals::ResidualPanel<f32>;
pub type CorrelationMatrix64 = residuals::CorrelationMatrix<f64>;
pub type CorrelationMatrix32 = residuals::CorrelationMatrix<f32>;
pub type ClusterAssignment64 = residuals::ClusterAssignment<f64>;
pub type WeightVector64 = ensemble::WeightVector<f64>;
pub type WeightVector32 = ensemble::WeightVector<f32>;
pub type CovarianceEstimate64 = ensemble::CovarianceEstimate<f64>;
pub type SkillReport64 = skill::SkillReport<f64>;
pub type TheoryCurve64 = skill::TheoryCurve<f64>;
pub type ContributionReport64 = contribution::ContributionReport<f64>;
pub type TruthTable64 = data::TruthTable<f64>;
