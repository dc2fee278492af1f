mod analysis;
mod ensemble;
mod simulate;
mod theory;

pub use analysis::{corr, residuals};
pub use ensemble::{contribution, ensemble};
pub use simulate::simulate;
pub use theory::theory;

use ensdiv::ensemble::{Strategy, WeightScope, DEFAULT_GAMMA, DEFAULT_SHRINKAGE};
use ensdiv::residuals::DEFAULT_MIN_OVERLAP;
use ensdiv::skill::{BaselineHorizon, Metric};

use crate::args::StrategyArgs;
use crate::config::StrategyName;
use crate::error::{config, CliResult};
use crate::output::Metadata;
use crate::Context;

pub struct Resolved {
    pub strategy: Strategy,
    pub scope: WeightScope,
    pub metric: Metric,
    pub baseline: BaselineHorizon,
}

/// Strategy and scoring settings from flags, then config, then defaults.
fn resolve_strategy(ctx: &Context, a: &StrategyArgs, meta: &mut Metadata) -> CliResult<Resolved> {
    let cfg = &ctx.cfg;
    let name = a.strategy.or(cfg.strategy).unwrap_or_default();
    let min_overlap = a.min_overlap.or(cfg.min_overlap).unwrap_or(DEFAULT_MIN_OVERLAP);
    let metric = a.metric.or(cfg.metric).unwrap_or_default();
    let strategy = match name {
        StrategyName::Mean => Strategy::Mean,
        StrategyName::Median => Strategy::Median,
        StrategyName::ClusterMean => Strategy::ClusterMean {
            k: a.k.or(cfg.k).ok_or_else(|| config("cluster_mean needs --k"))?,
            linkage: a.linkage.or(cfg.linkage).unwrap_or_default(),
            min_overlap,
            missing: a.missing_policy.or(cfg.missing_policy).unwrap_or_default(),
        },
        StrategyName::InverseError => Strategy::InverseError { metric },
        StrategyName::MinVariance => Strategy::MinVariance {
            shrinkage: a.shrinkage.or(cfg.shrinkage).unwrap_or(DEFAULT_SHRINKAGE),
            nonneg: !a.allow_negative && cfg.nonneg.unwrap_or(true),
        },
        StrategyName::CorrelationPenalized => Strategy::CorrelationPenalized {
            gamma: a.gamma.or(cfg.gamma).unwrap_or(DEFAULT_GAMMA),
            min_overlap,
            metric,
        },
    };
    let scope = a.weight_scope.or(cfg.weight_scope).unwrap_or_default();
    let baseline = match a.baseline_horizon.or(cfg.baseline_horizon) {
        None | Some(0) => BaselineHorizon::MatchForecast,
        Some(h) => BaselineHorizon::Fixed(h),
    };
    meta.param("strategy", &strategy);
    meta.param("weight_scope", scope);
    meta.param("metric", metric);
    meta.param("baseline_horizon", baseline);
    Ok(Resolved {
        strategy,
        scope,
        metric,
        baseline,
    })
}

fn seed_param(ctx: &Context, meta: &mut Metadata) {
    if let Some(seed) = ctx.seed {
        meta.param("seed", seed);
    }
}
