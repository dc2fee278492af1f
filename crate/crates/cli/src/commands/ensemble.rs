use ensdiv::contribution::{contribution_report, ContributionOptions};
use ensdiv::ensemble::{build_ensemble, Combiner};
use ensdiv::residuals::Scope;
use ensdiv::skill::{evaluate_skill, SkillReport};
use serde_json::{json, Value};

use super::{resolve_strategy, seed_param};
use crate::args::{ContributionArgs, EnsembleArgs};
use crate::error::CliResult;
use crate::input::load;
use crate::output::{num, opt, Metadata, Report, Table};
use crate::Context;

fn skill_row(t: &mut Table, id: &str, r: Option<&SkillReport<f64>>) {
    match r {
        Some(r) => t.push(vec![
            json!(id),
            json!(r.metric),
            num(r.error),
            num(r.baseline_error),
            num(r.skill),
            num(r.improvement),
            json!(r.n),
        ]),
        None => t.push(vec![json!(id), Value::Null, Value::Null, Value::Null, Value::Null, Value::Null, json!(0)]),
    }
}

fn scope_cells(s: &Scope) -> [Value; 2] {
    [
        s.location.as_ref().map_or(Value::Null, |l| json!(l)),
        s.horizon.map_or(Value::Null, |h| json!(h)),
    ]
}

pub fn ensemble(ctx: &Context, a: &EnsembleArgs) -> CliResult<()> {
    let mut meta = Metadata::new("ensemble");
    seed_param(ctx, &mut meta);
    let r = resolve_strategy(ctx, &a.strategy, &mut meta)?;
    let loaded = load(ctx, &a.input, true, &mut meta)?;
    let truth = loaded.truth.as_ref().expect("truth required");
    let panel = &loaded.panel;
    let built = build_ensemble(panel, &r.strategy, r.scope)?;

    let mut forecasts = Table::new(
        "forecasts",
        &["location", "horizon", "target_date", "forecast", "observed", "contributors"],
    );
    for (k, p) in &built.forecast.points {
        forecasts.push(vec![
            json!(k.location),
            json!(k.horizon),
            json!(k.target_date.to_string()),
            num(p.forecast),
            num(p.observed),
            json!(p.contributors),
        ]);
    }

    let mut skills = Table::new(
        "skill",
        &["model", "metric", "error", "baseline_error", "skill", "improvement", "n"],
    );
    for (id, series) in panel.iter() {
        let res = series.iter().map(|(k, p)| (k, p.residual()));
        match evaluate_skill(id, res, truth, r.baseline, r.metric) {
            Ok(rep) => skill_row(&mut skills, id, Some(&rep)),
            Err(e) => {
                meta.warn(format!("skill undefined for {id}: {e}"));
                skill_row(&mut skills, id, None);
            }
        }
    }
    let ens = evaluate_skill(&built.forecast.name, built.forecast.residuals(), truth, r.baseline, r.metric)?;
    skill_row(&mut skills, &built.forecast.name, Some(&ens));

    let mut report = Report::new(meta);
    report.tables.push(forecasts);
    report.tables.push(skills);

    let mut weights = Table::new("weights", &["location", "horizon", "model", "weight"]);
    let mut clusters = Table::new("clusters", &["location", "horizon", "model", "cluster"]);
    for (scope, fit) in &built.fits {
        let [loc, h] = scope_cells(scope);
        match fit {
            Combiner::Weights(w) => {
                for (id, x) in w.ids.iter().zip(&w.weights) {
                    weights.push(vec![loc.clone(), h.clone(), json!(id), num(*x)]);
                }
            }
            Combiner::Clusters(c) => {
                for (id, l) in c.ids.iter().zip(&c.labels) {
                    clusters.push(vec![loc.clone(), h.clone(), json!(id), json!(l)]);
                }
            }
            Combiner::Mean | Combiner::Median => {}
        }
    }
    if !weights.rows.is_empty() {
        report.tables.push(weights);
    }
    if !clusters.rows.is_empty() {
        report.tables.push(clusters);
    }
    report.write(ctx.format, ctx.output.as_ref())
}

pub fn contribution(ctx: &Context, a: &ContributionArgs) -> CliResult<()> {
    let mut meta = Metadata::new("contribution");
    seed_param(ctx, &mut meta);
    let r = resolve_strategy(ctx, &a.strategy, &mut meta)?;
    let intercept = a.intercept.or(ctx.cfg.intercept).unwrap_or_default();
    meta.param("intercept", intercept);
    let loaded = load(ctx, &a.input, true, &mut meta)?;
    let truth = loaded.truth.as_ref().expect("truth required");
    let opts = ContributionOptions {
        strategy: r.strategy,
        scope: r.scope,
        metric: r.metric,
        baseline: r.baseline,
        intercept,
    };
    let rep = contribution_report(&loaded.panel, truth, &opts)?;
    meta.info("ensemble_skill", rep.ensemble_skill);
    meta.info("loo_delta", "skill without the model minus skill with it; positive means the model helps");

    let mut t = Table::new(
        "contribution",
        &[
            "model",
            "skill",
            "loo_delta",
            "independent_fraction",
            "beats_baseline",
            "n_dates",
            "independent_fraction_excl_self",
        ],
    );
    for row in &rep.rows {
        t.push(vec![
            json!(row.model_id),
            num(row.skill),
            opt(row.loo_delta),
            num(row.independent_fraction),
            json!(row.beats_baseline),
            json!(row.n_dates),
            opt(row.independent_fraction_excl_self),
        ]);
    }
    let mut report = Report::new(meta);
    report.tables.push(t);
    report.write(ctx.format, ctx.output.as_ref())
}
