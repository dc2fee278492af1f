use ensdiv::residuals::{
    agglomerative_cluster, average_offdiagonal, cluster_summary, compute_residuals, pairwise_correlations,
    rolling_correlations, ClusterAssignment, CorrelationMatrix, Scope, DEFAULT_MIN_OVERLAP,
};
use ensdiv::Error;
use serde_json::{json, Value};

use super::seed_param;
use crate::args::{CorrArgs, ResidualsArgs};
use crate::error::{config, CliResult};
use crate::input::load;
use crate::output::{num, opt, Metadata, Report, Table};
use crate::Context;

pub fn residuals(ctx: &Context, a: &ResidualsArgs) -> CliResult<()> {
    let mut meta = Metadata::new("residuals");
    seed_param(ctx, &mut meta);
    let loaded = load(ctx, &a.input, false, &mut meta)?;
    let mut t = Table::new(
        "residuals",
        &["model", "location", "horizon", "target_date", "forecast", "observed", "residual"],
    );
    for (model, key, pair) in loaded.panel.rows() {
        t.push(vec![
            json!(model),
            json!(key.location),
            json!(key.horizon),
            json!(key.target_date.to_string()),
            num(pair.forecast),
            num(pair.observed),
            num(pair.residual()),
        ]);
    }
    let mut report = Report::new(meta);
    report.tables.push(t);
    report.write(ctx.format, ctx.output.as_ref())
}

fn scope_label(scope: &Scope) -> String {
    match (&scope.location, scope.horizon) {
        (Some(l), Some(h)) => format!("{l}/h{h}"),
        (None, Some(h)) => format!("h{h}"),
        (Some(l), None) => l.clone(),
        (None, None) => "all".into(),
    }
}

fn push_long(t: &mut Table, corr: &CorrelationMatrix<f64>, label: &str, index: Option<usize>) {
    let (start, end) = corr.window.bounds();
    let ids = corr.ids();
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            t.push(vec![
                json!(label),
                index.map_or(Value::Null, Value::from),
                start.map_or(Value::Null, |d| d.to_string().into()),
                end.map_or(Value::Null, |d| d.to_string().into()),
                json!(ids[i]),
                json!(ids[j]),
                opt(corr.get(i, j)),
                json!(corr.overlap(i, j)),
            ]);
        }
    }
}

fn matrix_table(corr: &CorrelationMatrix<f64>) -> Table {
    let mut cols = vec!["model".to_string()];
    cols.extend(corr.ids().iter().cloned());
    let mut t = Table::with_columns("matrix", cols);
    for (i, id) in corr.ids().iter().enumerate() {
        let mut row = vec![json!(id)];
        row.extend((0..corr.len()).map(|j| opt(corr.get(i, j))));
        t.push(row);
    }
    t
}

fn cluster_tables(corr: &CorrelationMatrix<f64>, c: &ClusterAssignment<f64>) -> CliResult<Vec<Table>> {
    let mut clusters = Table::new("clusters", &["node", "model", "cluster"]);
    for (i, (id, label)) in c.ids.iter().zip(&c.labels).enumerate() {
        clusters.push(vec![json!(i), json!(id), json!(label)]);
    }
    for id in &c.excluded {
        clusters.push(vec![Value::Null, json!(id), Value::Null]);
    }
    let mut dendrogram = Table::new("dendrogram", &["step", "left", "right", "height", "size"]);
    for m in &c.dendrogram {
        dendrogram.push(vec![json!(m.step), json!(m.left), json!(m.right), num(m.height), json!(m.size)]);
    }
    let s = cluster_summary(corr, c)?;
    let mut summary = Table::new(
        "summary",
        &["k", "within_pairs", "between_pairs", "within_models", "between_models", "within_count", "between_count"],
    );
    summary.push(vec![
        json!(c.k),
        opt(s.within_pairs),
        opt(s.between_pairs),
        opt(s.within_models),
        opt(s.between_models),
        json!(s.within_count),
        json!(s.between_count),
    ]);
    Ok(vec![clusters, dendrogram, summary])
}

pub fn corr(ctx: &Context, a: &CorrArgs) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let mut meta = Metadata::new("corr");
    seed_param(ctx, &mut meta);
    let loaded = load(ctx, &a.input, false, &mut meta)?;

    let pooling = a.pooling.or(cfg.pooling).unwrap_or_default();
    let min_overlap = a.min_overlap.or(cfg.min_overlap).unwrap_or(DEFAULT_MIN_OVERLAP);
    meta.param("pooling", pooling);
    meta.param("min_overlap", min_overlap);
    let mut panels = compute_residuals(&loaded.panel, pooling)?;
    if panels.len() > 1 {
        let scopes: Vec<String> = panels.iter().map(|p| scope_label(&p.scope)).collect();
        return Err(config(format!(
            "input spans {} residual scopes ({}); select one with --horizon/--location or use --pooling all",
            scopes.len(),
            scopes.join(", ")
        )));
    }
    let res = panels.remove(0);
    meta.info("scope", scope_label(&res.scope));

    let full = pairwise_correlations(&res, min_overlap)?;
    for d in &full.diagnostics {
        meta.warn(d.clone());
    }
    let all_missing = full.len() > 1 && full.offdiagonal().next().is_none();
    if all_missing {
        meta.warn(format!("no model pair reaches min_overlap {min_overlap}; the matrix is entirely missing"));
    }
    meta.info("average_offdiagonal", average_offdiagonal(&full).ok());

    let mut long = Table::new(
        "correlations",
        &["window", "window_index", "window_start", "window_end", "model_i", "model_j", "r", "overlap"],
    );
    push_long(&mut long, &full, "full", None);
    if let Some(window) = a.window.or(cfg.window) {
        let step = a.step.or(cfg.step).unwrap_or(window);
        meta.param("window", window);
        meta.param("step", step);
        let rolling = rolling_correlations(&res, window, step, min_overlap)?;
        meta.info("rolling_windows", rolling.len());
        for (i, m) in rolling.iter().enumerate() {
            push_long(&mut long, m, "rolling", Some(i));
        }
    }

    let mut report = Report::new(meta);
    report.tables.push(long);
    report.tables.push(matrix_table(&full));

    if let Some(k) = a.k.or(cfg.k) {
        let linkage = a.linkage.or(cfg.linkage).unwrap_or_default();
        let missing = a.missing_policy.or(cfg.missing_policy).unwrap_or_default();
        report.metadata.param("k", k);
        report.metadata.param("linkage", linkage);
        report.metadata.param("missing_policy", missing);
        if all_missing {
            report.metadata.warn("clustering skipped: no pairwise correlations");
            return report.write(ctx.format, ctx.output.as_ref());
        }
        match agglomerative_cluster(&full, k, linkage, missing) {
            Ok(c) => {
                if !c.excluded.is_empty() {
                    report.metadata.warn(format!("left out of clustering: {}", c.excluded.join(", ")));
                }
                report.tables.extend(cluster_tables(&full, &c)?);
            }
            Err(Error::CannotCluster) => report.metadata.warn("no model has a usable correlation; clustering skipped"),
            Err(e) => return Err(e.into()),
        }
    }
    report.write(ctx.format, ctx.output.as_ref())
}
