use ensdiv::skill::{published, theory_curve, RhoGrid};
use serde_json::json;

use super::seed_param;
use crate::args::TheoryArgs;
use crate::error::{config, CliResult};
use crate::output::{num, Metadata, Report, Table};
use crate::Context;

pub fn theory(ctx: &Context, a: &TheoryArgs) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let mut meta = Metadata::new("theory");
    seed_param(ctx, &mut meta);
    let s = a.s.or(cfg.s).ok_or_else(|| config("theory needs --s (single-model skill)"))?;
    let n = a.n.or(cfg.n).ok_or_else(|| config("theory needs --n (ensemble size)"))?;
    let grid = if !a.rho.is_empty() {
        RhoGrid::Explicit(a.rho.clone())
    } else if a.grid_start.is_some() || a.grid_stop.is_some() || a.grid_points.is_some() {
        RhoGrid::Uniform {
            start: a.grid_start.unwrap_or(0.0),
            stop: a.grid_stop.unwrap_or(1.0),
            points: a.grid_points.unwrap_or(101),
        }
    } else {
        cfg.grid.clone().unwrap_or(RhoGrid::Uniform {
            start: 0.0,
            stop: 1.0,
            points: 101,
        })
    };
    meta.param("s", s);
    meta.param("n", n);
    meta.param("grid", &grid);

    let mut curve = theory_curve(s, n, &grid)?;
    if let Some(obs) = a.observed.or(cfg.observed) {
        meta.param("observed", obs);
        curve = curve.with_observed(obs)?;
    }
    meta.info("metric", curve.metric);
    meta.info("implied_rho", curve.observed.as_ref().map(|o| o.implied_rho));
    if a.annotate || cfg.annotate.unwrap_or(false) {
        meta.info(
            "published",
            json!({
                "source": published::SOURCE,
                "median_model_skill": published::MEDIAN_MODEL_SKILL,
                "best_model_skill": published::BEST_MODEL_SKILL,
                "ensemble_skill": published::ENSEMBLE_SKILL,
                "model_count": published::MODEL_COUNT,
            }),
        );
    }

    let mut t = Table::new("curve", &["kind", "rho", "skill_ens", "improvement"]);
    for (rho, skill) in &curve.points {
        t.push(vec![json!("curve"), num(*rho), num(*skill), num(1.0 - skill)]);
    }
    if let Some(o) = &curve.observed {
        t.push(vec![json!("observed"), num(o.implied_rho), num(o.skill), num(1.0 - o.skill)]);
    }
    let mut report = Report::new(meta);
    report.tables.push(t);
    report.write(ctx.format, ctx.output.as_ref())
}
