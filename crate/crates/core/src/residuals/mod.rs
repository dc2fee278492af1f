//! Residuals, pairwise Pearson correlation under overlap rules, rolling
//! windows, and agglomerative clustering of models by residual correlation.

mod cluster;
mod correlation;
mod residual;
mod rolling;
mod summary;

pub use cluster::{agglomerative_cluster, restrict_complete, ClusterAssignment, Linkage, Merge, MissingPolicy};
pub use correlation::{
    average_offdiagonal, average_offdiagonal_by_model, pairwise_correlations, pearson, CorrelationMatrix, Window,
    DEFAULT_MIN_OVERLAP,
};
pub use residual::{compute_residuals, Pooling, ResidualPanel, Scope};
pub use rolling::rolling_correlations;
pub use summary::{cluster_summary, ClusterSummary};
