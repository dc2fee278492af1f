use super::cluster::ClusterAssignment;
use super::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::num::{mean, Scalar};

/// Within- and between-cluster correlation means.
///
/// `*_pairs` average over unordered model pairs; `*_models` first average
/// each model's entries and then average over models. Either is absent when
/// no present entry falls in that class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary<F = f64> {
    pub within_pairs: Option<F>,
    pub between_pairs: Option<F>,
    pub within_models: Option<F>,
    pub between_models: Option<F>,
    pub within_count: usize,
    pub between_count: usize,
    pub sizes: Vec<usize>,
}

pub fn cluster_summary<F: Scalar>(corr: &CorrelationMatrix<F>, clusters: &ClusterAssignment<F>) -> Result<ClusterSummary<F>> {
    let idx: Vec<usize> = clusters
        .ids
        .iter()
        .map(|id| {
            corr.index_of(id)
                .ok_or_else(|| Error::param(format!("clustered model {id} is not in the correlation matrix")))
        })
        .collect::<Result<_>>()?;
    let m = idx.len();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    let mut per_model_within = vec![Vec::new(); m];
    let mut per_model_between = vec![Vec::new(); m];
    for a in 0..m {
        for b in a + 1..m {
            let Some(r) = corr.get(idx[a], idx[b]) else { continue };
            let same = clusters.labels[a] == clusters.labels[b];
            if same {
                within.push(r);
                per_model_within[a].push(r);
                per_model_within[b].push(r);
            } else {
                between.push(r);
                per_model_between[a].push(r);
                per_model_between[b].push(r);
            }
        }
    }
    let model_mean = |rows: &[Vec<F>]| {
        let means: Vec<F> = rows.iter().filter_map(|r| mean(r)).collect();
        mean(&means)
    };
    Ok(ClusterSummary {
        within_pairs: mean(&within),
        between_pairs: mean(&between),
        within_models: model_mean(&per_model_within),
        between_models: model_mean(&per_model_between),
        within_count: within.len(),
        between_count: between.len(),
        sizes: clusters.sizes(),
    })
}
