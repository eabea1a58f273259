use naggs_core::sde_lab::{run_quadratic_ensemble, MetricSeries, ScatterPoint};
use serde::Serialize;

use super::Ctx;
use crate::config::SimulateConfig;
use crate::error::Result;
use crate::output::Output;

#[derive(Serialize)]
struct OutcomeRow<'a> {
    method: &'a str,
    alpha: f64,
    scatter_file: String,
    diverged_fraction: f64,
    final_distance: f64,
    scatter_trace: f64,
}

/// Quadratic ensembles for every method and step size. Writes the metric
/// series, one scatter table per `(method, α)` and a summary.
pub fn run(cfg: &SimulateConfig, ctx: &Ctx) -> Result<Output> {
    let exp = cfg.experiment()?;
    let mut metrics = MetricSeries::new(serde_json::Value::Null);
    let mut scatters: Vec<(String, Vec<ScatterPoint>)> = Vec::new();
    let mut summary = Vec::new();
    for &method in &cfg.methods {
        let run = run_quadratic_ensemble(&exp, method, ctx.seed)?;
        metrics.extend(run.series)?;
        for (i, o) in run.outcomes.into_iter().enumerate() {
            let stem = format!("scatter_{}_{i}", method.name());
            ctx.info(&format!("{}: diverged {:.3}, distance {:.4e}", o.method_label, o.diverged_fraction, o.final_distance));
            summary.push(OutcomeRow {
                method: method.name(),
                alpha: o.alpha,
                scatter_file: stem.clone(),
                diverged_fraction: o.diverged_fraction,
                final_distance: o.final_distance,
                scatter_trace: o.scatter_trace,
            });
            scatters.push((stem, o.scatter));
        }
    }

    let mut out = Output::new(ctx.format);
    out.table("metrics", &["iteration", "metric", "method", "value"], &metrics.rows)?;
    for (stem, points) in &scatters {
        out.table(stem, &["point_id", "coord", "value", "plane"], points)?;
    }
    out.json("summary", &serde_json::json!({ "experiment": exp, "outcomes": summary }))?;
    Ok(out)
}
