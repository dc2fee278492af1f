use ensdiv::skill::theoretical_ensemble_skill;
use ensdiv::synthetic::{generate, monte_carlo_ensemble_skill, CorrelationStructure, ErrorScale, SimConfig};
use serde_json::{json, Value};

use super::resolve_strategy;
use crate::args::SimulateArgs;
use crate::error::{config, CliError, CliResult};
use crate::output::{num, opt, read_input, InputDigest, Metadata, Report, Table};
use crate::config::Format;
use crate::Context;

const DEFAULT_REPS: usize = 50;

fn sim_config(ctx: &Context, a: &SimulateArgs, meta: &mut Metadata) -> CliResult<SimConfig> {
    let mut sim = match &a.sim_config {
        Some(path) => {
            let data = read_input("simulation", path, &mut meta.inputs)?;
            serde_json::from_slice(&data).map_err(|source| CliError::ConfigFile {
                path: path.clone(),
                source,
            })?
        }
        None => ctx
            .cfg
            .simulation
            .clone()
            .ok_or_else(|| config("simulate needs --sim-config or a `simulation` block in --config"))?,
    };
    if let Some(seed) = ctx.seed {
        sim.seed = seed;
    }
    sim.validate()?;
    meta.param("simulation", &sim);
    Ok(sim)
}

/// Equal-weight analytic skill, defined when errors are unbiased and calibrated to a target skill.
fn analytic(sim: &SimConfig, rho: f64) -> Option<f64> {
    let ErrorScale::TargetSkill(s) = sim.error else { return None };
    if sim.bias.iter().any(|b| *b != 0.0) {
        return None;
    }
    if sim.models == 1 {
        return Some(s);
    }
    theoretical_ensemble_skill(s, sim.models, rho).ok()
}

fn sweep(ctx: &Context, a: &SimulateArgs, sim: SimConfig, mut meta: Metadata) -> CliResult<()> {
    let reps = a.reps.or(ctx.cfg.reps).unwrap_or(DEFAULT_REPS);
    let r = resolve_strategy(ctx, &a.strategy, &mut meta)?;
    meta.param("reps", reps);
    let rhos: Vec<f64> = if !a.sweep.is_empty() {
        a.sweep.clone()
    } else {
        ctx.cfg.sweep.clone().unwrap_or_default()
    };
    let configs: Vec<(Option<f64>, SimConfig)> = if rhos.is_empty() {
        let rho = match sim.correlation {
            CorrelationStructure::Equicorrelated { rho } => Some(rho),
            CorrelationStructure::Block { .. } => None,
        };
        vec![(rho, sim)]
    } else {
        if !matches!(sim.correlation, CorrelationStructure::Equicorrelated { .. }) {
            return Err(config("--sweep varies ρ and needs an equicorrelated simulation config"));
        }
        meta.param("sweep", &rhos);
        rhos.iter()
            .map(|&rho| {
                let c = SimConfig {
                    correlation: CorrelationStructure::Equicorrelated { rho },
                    ..sim.clone()
                };
                c.validate().map(|_| (Some(rho), c))
            })
            .collect::<Result<_, _>>()?
    };
    let mut t = Table::new("sweep", &["rho", "empirical_skill", "stderr", "analytic_skill", "reps"]);
    for (rho, c) in &configs {
        let mc = monte_carlo_ensemble_skill(c, reps, &r.strategy)?;
        t.push(vec![
            opt(*rho),
            num(mc.mean),
            opt(mc.std_error),
            opt(rho.and_then(|x| analytic(c, x))),
            json!(mc.reps),
        ]);
    }
    let mut report = Report::new(meta);
    report.tables.push(t);
    report.write(ctx.format, ctx.output.as_ref())
}

fn panels(ctx: &Context, sim: SimConfig, mut meta: Metadata) -> CliResult<()> {
    let dir = ctx
        .output
        .clone()
        .ok_or_else(|| config("simulate without --reps or --sweep writes panel files and needs --output DIR"))?;
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let run = generate::<f64>(&sim)?;
    meta.info("sigma", run.panel.sigma);
    meta.info("floored_truth", run.truth.floored);
    meta.info("floored_forecasts", run.panel.floored);
    meta.info("blocks", &run.panel.blocks);

    let mut forecasts = Table::new(
        "forecasts",
        &["model", "forecast_date", "target_end_date", "location", "type", "quantile", "value"],
    );
    for (model, records) in run.panel.forecasts.iter() {
        for rec in records {
            forecasts.push(vec![
                json!(model),
                json!(rec.forecast_date.to_string()),
                json!(rec.target_date.to_string()),
                json!(rec.location),
                json!("point"),
                Value::Null,
                num(rec.value),
            ]);
        }
    }
    let mut truth = Table::new("truth", &["location", "date", "value"]);
    for (d, v) in run.truth.series.observations() {
        truth.push(vec![json!(run.truth.series.location), json!(d.to_string()), num(*v)]);
    }

    let mut files = Table::new("files", &["file", "rows", "sha256"]);
    for table in [forecasts, truth] {
        let path = dir.join(format!("{}.csv", table.name));
        let rows = table.rows.len();
        let mut file_report = Report::new(meta.clone());
        file_report.tables.push(table);
        file_report.write(Format::Csv, Some(&path))?;
        let mut digests = Vec::new();
        read_input("output", &path, &mut digests)?;
        let InputDigest { sha256, .. } = digests.remove(0);
        files.push(vec![json!(path.display().to_string()), json!(rows), json!(sha256)]);
    }
    let mut report = Report::new(meta);
    report.tables.push(files);
    report.write(ctx.format, None)
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> CliResult<()> {
    let mut meta = Metadata::new("simulate");
    let sim = sim_config(ctx, a, &mut meta)?;
    if a.reps.or(ctx.cfg.reps).is_some() || !a.sweep.is_empty() || ctx.cfg.sweep.is_some() {
        sweep(ctx, a, sim, meta)
    } else {
        panels(ctx, sim, meta)
    }
}
