use naggs_core::sde_lab::run_stationarity_study;

use super::Ctx;
use crate::config::StationarySection;
use crate::error::Result;
use crate::output::Output;

/// Per-epoch KL, W1 and KS of GF-Euler and NAG-GS ensembles against the
/// Gibbs reference, plus the final values.
pub fn run(section: &StationarySection, ctx: &Ctx) -> Result<Output> {
    let cfg = section.resolve()?;
    let series = run_stationarity_study(&cfg, ctx.seed)?;
    let mut finals = serde_json::Map::new();
    for method in series.methods() {
        let last: serde_json::Map<String, serde_json::Value> = ["kl", "w1", "ks"]
            .iter()
            .map(|m| (m.to_string(), serde_json::json!(series.last(m, method))))
            .collect();
        ctx.info(&format!("{method}: {}", serde_json::Value::Object(last.clone())));
        finals.insert(method.to_string(), last.into());
    }
    let mut out = Output::new(ctx.format);
    out.table("metrics", &["iteration", "metric", "method", "value"], &series.rows)?;
    out.json("summary", &serde_json::json!({ "config": cfg, "final": finals }))?;
    Ok(out)
}
