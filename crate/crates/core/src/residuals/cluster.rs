use serde::{Deserialize, Serialize};

use super::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

/// Treatment of missing correlations when clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Cluster only a subset of models whose pairwise entries are all present.
    #[default]
    Restrict,
    /// Use the maximum distance 2 for missing pairs.
    ImputeMax,
}

/// One agglomeration step. Leaves are nodes `0..n`; step `s` creates node `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge<F = f64> {
    pub step: usize,
    pub left: usize,
    pub right: usize,
    pub height: F,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<F = f64> {
    /// Clustered models, in correlation-matrix order.
    pub ids: Vec<String>,
    /// Label in `0..k` per clustered model; labels are numbered by each
    /// cluster's first member.
    pub labels: Vec<usize>,
    pub k: usize,
    pub linkage: Linkage,
    /// Full merge sequence down to one cluster.
    pub dendrogram: Vec<Merge<F>>,
    /// Models left out under [`MissingPolicy::Restrict`] or lacking any entry.
    pub excluded: Vec<String>,
}

impl<F> ClusterAssignment<F> {
    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|m| m == id).map(|i| self.labels[i])
    }

    pub fn clusters(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.k];
        for (id, &l) in self.ids.iter().zip(&self.labels) {
            out[l].push(id.clone());
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters().iter().map(Vec::len).collect()
    }
}

/// Greedily drops the model with the most missing pairwise entries (last
/// index on ties) until every remaining pair is present.
///
/// Returns (kept, dropped) as matrix indices, both ascending.
pub fn restrict_complete<F: Scalar>(corr: &CorrelationMatrix<F>, candidates: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut kept = candidates.to_vec();
    let mut dropped = Vec::new();
    loop {
        let missing: Vec<usize> = kept
            .iter()
            .map(|&i| kept.iter().filter(|&&j| j != i && corr.get(i, j).is_none()).count())
            .collect();
        let Some((pos, &worst)) = missing.iter().enumerate().max_by_key(|(_, &m)| m) else {
            break;
        };
        if worst == 0 {
            break;
        }
        dropped.push(kept.remove(pos));
    }
    dropped.sort_unstable();
    (kept, dropped)
}

struct Active<F> {
    node: usize,
    members: Vec<usize>,
    /// Distance to every other active cluster, indexed by slot.
    dist: Vec<F>,
}

/// Bottom-up clustering on distances `1 − r` until `k` clusters remain.
///
/// On equal heights the pair whose first members have the lowest indices
/// merges first. The dendrogram is continued to a single cluster so it can
/// be cut at any level.
pub fn agglomerative_cluster<F: Scalar>(
    corr: &CorrelationMatrix<F>,
    k: usize,
    linkage: Linkage,
    missing: MissingPolicy,
) -> Result<ClusterAssignment<F>> {
    let n = corr.len();
    let usable: Vec<usize> = (0..n).filter(|&i| (0..n).any(|j| corr.get(i, j).is_some())).collect();
    if usable.is_empty() {
        return Err(Error::CannotCluster);
    }
    if k == 0 || k > usable.len() {
        return Err(Error::param(format!(
            "k = {k} must lie in 1..={} (models with correlation entries)",
            usable.len()
        )));
    }
    let (members, mut excluded): (Vec<usize>, Vec<usize>) = match missing {
        MissingPolicy::Restrict => restrict_complete(corr, &usable),
        MissingPolicy::ImputeMax => (usable.clone(), Vec::new()),
    };
    excluded.extend((0..n).filter(|i| !usable.contains(i)));
    excluded.sort_unstable();
    let m = members.len();
    if k > m {
        return Err(Error::param(format!(
            "k = {k} exceeds the {m} models with complete pairwise correlations"
        )));
    }

    let two = F::one() + F::one();
    let distance = |a: usize, b: usize| corr.get(a, b).map_or(two, |r| F::one() - r);
    let mut active: Vec<Active<F>> = members
        .iter()
        .enumerate()
        .map(|(slot, &i)| Active {
            node: slot,
            members: vec![slot],
            dist: members.iter().map(|&j| distance(i, j)).collect(),
        })
        .collect();

    let mut dendrogram = Vec::with_capacity(m.saturating_sub(1));
    let mut labels = if k == m { Some((0..m).collect::<Vec<_>>()) } else { None };
    while active.len() > 1 {
        // Slots stay ordered by first member, so scanning (a, b) in slot
        // order and keeping strict improvements implements the tie rule.
        let mut best: Option<(usize, usize, F)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let d = active[a].dist[b];
                if best.is_none_or(|(_, _, h)| d < h) {
                    best = Some((a, b, d));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters");
        let (size_a, size_b) = (
            F::from_usize_lossy(active[a].members.len()),
            F::from_usize_lossy(active[b].members.len()),
        );
        for c in 0..active.len() {
            if c == a || c == b {
                continue;
            }
            let (da, db) = (active[a].dist[c], active[b].dist[c]);
            let d = match linkage {
                Linkage::Average => (size_a * da + size_b * db) / (size_a + size_b),
                Linkage::Complete => da.max(db),
                Linkage::Single => da.min(db),
            };
            active[a].dist[c] = d;
            active[c].dist[a] = d;
        }
        let removed = active.remove(b);
        for cluster in &mut active {
            cluster.dist.remove(b);
        }
        let merged = &mut active[a];
        dendrogram.push(Merge {
            step: dendrogram.len(),
            left: merged.node,
            right: removed.node,
            height,
            size: merged.members.len() + removed.members.len(),
        });
        merged.node = m + dendrogram.len() - 1;
        merged.members.extend(removed.members);
        merged.members.sort_unstable();

        if active.len() == k {
            let mut l = vec![0; m];
            for (label, cluster) in active.iter().enumerate() {
                for &member in &cluster.members {
                    l[member] = label;
                }
            }
            labels = Some(l);
        }
    }

    Ok(ClusterAssignment {
        ids: members.iter().map(|&i| corr.ids()[i].clone()).collect(),
        labels: labels.unwrap_or_else(|| vec![0; m]),
        k,
        linkage,
        dendrogram,
        excluded: excluded.iter().map(|&i| corr.ids()[i].clone()).collect(),
    })
}
