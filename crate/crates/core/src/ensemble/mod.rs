//! Ensemble combiners and weighting schemes.

mod combine;
mod covariance;
mod strategy;
mod weights;

pub use combine::{
    cluster_then_mean, mean_ensemble, median_ensemble, weighted_ensemble, EnsembleForecast, EnsemblePoint,
    MissingModels,
};
pub use covariance::{estimate_covariance, CovarianceEstimate, DEFAULT_SHRINKAGE};
pub use strategy::{build_ensemble, fit_combiner, Combiner, EnsembleBuild, Strategy, WeightScope};
pub use weights::{
    correlation_penalized_weights, inverse_error_weights, min_variance_weights, PenalizedWeights, WeightScheme,
    WeightVector, DEFAULT_GAMMA,
};
