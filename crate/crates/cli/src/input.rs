//! Loading and aligning the forecast/truth inputs shared by the data subcommands.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ensdiv::data::{
    align, extract_points, parse_forecast_csv, parse_truth_csv, read_aligned_csv, read_aligned_json, AlignFilter,
    AlignedPanel, Reject,
};
use ensdiv::{Error, TruthTable64};
use serde_json::Value;

use crate::args::InputArgs;
use crate::error::{config, CliResult};
use crate::output::{read_input, Metadata};
use crate::Context;

pub struct Loaded {
    pub panel: AlignedPanel<f64>,
    pub truth: Option<TruthTable64>,
}

fn report_rejects(ctx: &Context, what: &str, rejects: &[Reject]) {
    if ctx.verbose {
        for r in rejects {
            eprintln!("rejected {what} line {}: {} [{}]", r.line, r.reason, r.fields.join(","));
        }
    }
}

fn filter(ctx: &Context, args: &InputArgs, meta: &mut Metadata) -> AlignFilter {
    let horizons: Vec<u32> = if args.horizons.is_empty() {
        ctx.cfg.horizons.clone().unwrap_or_default()
    } else {
        args.horizons.clone()
    };
    let locations: Vec<String> = if args.locations.is_empty() {
        ctx.cfg.locations.clone().unwrap_or_default()
    } else {
        args.locations.clone()
    };
    if !horizons.is_empty() {
        meta.param("horizons", &horizons);
    }
    if !locations.is_empty() {
        meta.param("locations", &locations);
    }
    AlignFilter {
        horizons: (!horizons.is_empty()).then(|| horizons.into_iter().collect::<BTreeSet<_>>()),
        locations: (!locations.is_empty()).then(|| locations.into_iter().collect::<BTreeSet<_>>()),
    }
}

fn load_truth(ctx: &Context, path: &Path, meta: &mut Metadata) -> CliResult<TruthTable64> {
    let data = read_input("truth", path, &mut meta.inputs)?;
    let format = ctx.cfg.truth_format.clone().unwrap_or_default();
    let parsed = parse_truth_csv(data.as_slice(), &format)?;
    report_rejects(ctx, "truth", &parsed.rejects);
    meta.info("truth_rejects", parsed.rejects.len());
    Ok(parsed.truth)
}

fn load_aligned(path: &Path, meta: &mut Metadata) -> CliResult<AlignedPanel<f64>> {
    let data = read_input("aligned", path, &mut meta.inputs)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if !is_json {
        return Ok(read_aligned_csv(data.as_slice(), b',')?);
    }
    // Accept both a bare row array and the `residuals` output document.
    let value: Value = serde_json::from_slice(&data).map_err(Error::from)?;
    let rows = match value {
        Value::Object(mut m) => m.remove("residuals").ok_or(Error::MissingColumn("residuals".into()))?,
        other => other,
    };
    Ok(read_aligned_json(serde_json::to_vec(&rows)?.as_slice())?)
}

/// Aligned panel from either an aligned table or forecast plus truth files.
pub fn load(ctx: &Context, args: &InputArgs, need_truth: bool, meta: &mut Metadata) -> CliResult<Loaded> {
    let pick = |flag: &Option<PathBuf>, cfg: &Option<PathBuf>| flag.clone().or_else(|| cfg.clone());
    let forecasts = pick(&args.forecasts, &ctx.cfg.forecasts);
    let truth_path = pick(&args.truth, &ctx.cfg.truth);
    let aligned = pick(&args.aligned, &ctx.cfg.aligned);
    let filter = filter(ctx, args, meta);

    let (panel, truth) = match (aligned, forecasts) {
        (Some(_), Some(_)) => return Err(config("give either --aligned or --forecasts, not both")),
        (None, None) => return Err(config("no input: give --forecasts with --truth, or --aligned")),
        (Some(path), None) => {
            let panel = load_aligned(&path, meta)?;
            let truth = match truth_path {
                Some(t) => Some(load_truth(ctx, &t, meta)?),
                None => None,
            };
            (panel.filter_keys(|k| filter.accepts(k)), truth)
        }
        (None, Some(path)) => {
            let truth_path = truth_path.ok_or_else(|| config("--forecasts needs --truth"))?;
            let data = read_input("forecasts", &path, &mut meta.inputs)?;
            let format = ctx.cfg.forecast_format.clone().unwrap_or_default();
            let parsed = parse_forecast_csv::<f64, _>(data.as_slice(), &format)?;
            report_rejects(ctx, "forecast", &parsed.rejects);
            meta.info("forecast_rejects", parsed.rejects.len());
            meta.info("non_weekly_records", parsed.panel.non_weekly);
            let truth = load_truth(ctx, &truth_path, meta)?;
            let policy = args.point_policy.or(ctx.cfg.point_policy).unwrap_or_default();
            meta.param("point_policy", policy);
            let points = extract_points(&parsed.panel, policy);
            meta.info("missing_points", points.missing_count());
            if ctx.verbose {
                for (m, k) in &points.missing {
                    eprintln!("no point value for {m} at {} h{} {}", k.location, k.horizon, k.target_date);
                }
            }
            (align(&points.panel, &truth, &filter)?, Some(truth))
        }
    };
    if panel.is_empty() {
        return Err(Error::EmptyAlignment.into());
    }
    if need_truth && truth.is_none() {
        return Err(config("this subcommand scores against persistence and needs --truth"));
    }
    meta.info("aligned_rows", panel.row_count());
    meta.info("models", panel.model_count());
    Ok(Loaded { panel, truth })
}
