use naggs_core::spectrum::{extreme_eigenvalues, HessianOperator};
use naggs_core::training::{train_logistic_with, TrainConfig};
use rayon::prelude::*;
use serde::Serialize;

use super::Ctx;
use crate::config::SpectrumSection;
use crate::error::{config_err, Result};
use crate::output::Output;

#[derive(Serialize)]
struct Row {
    checkpoint_id: usize,
    lambda_min: f64,
    lambda_max: f64,
    residual_min: f64,
    residual_max: f64,
    converged: bool,
}

/// Extreme Hessian eigenvalues of the full training loss at each checkpoint.
pub fn run(cfg: &SpectrumSection, ctx: &Ctx) -> Result<Output> {
    if !(cfg.tol > 0.0 && cfg.tol < 1.0) || cfg.max_iter == 0 {
        return config_err("spectrum needs 0 < tol < 1 and max_iter > 0");
    }
    cfg.optimizer.with_learning_rate(cfg.optimizer.learning_rate())?;
    let data = cfg.data.load(ctx.seed)?;
    let dim = data.param_dim();
    let checkpoints = match &cfg.checkpoints {
        Some(list) => {
            if list.is_empty() {
                return config_err("spectrum.checkpoints must not be empty");
            }
            if let Some(bad) = list.iter().position(|w| w.len() != dim) {
                return config_err(format!("checkpoint {bad} has {} entries, the model has {dim}", list[bad].len()));
            }
            list.clone()
        }
        None => {
            let mut saved = Vec::new();
            let tc = TrainConfig { epochs: cfg.epochs, batch_size: cfg.batch_size };
            let run = train_logistic_with(&data, None, &cfg.optimizer, &tc, ctx.seed, |_, w| {
                saved.push(w.to_vec());
                Ok(())
            })?;
            if run.diverged {
                ctx.warn("training diverged; later epochs are missing");
            }
            saved
        }
    };

    let rows: Vec<Row> = checkpoints
        .par_iter()
        .enumerate()
        .map(|(id, w)| {
            let op = HessianOperator::new(&data, w.clone())?;
            let (lo, hi) = extreme_eigenvalues(&op, cfg.tol, cfg.max_iter, ctx.seed)?;
            Ok(Row {
                checkpoint_id: id,
                lambda_min: lo.value,
                lambda_max: hi.value,
                residual_min: lo.residual,
                residual_max: hi.residual,
                converged: lo.converged && hi.converged,
            })
        })
        .collect::<naggs_core::Result<_>>()?;
    if rows.iter().any(|r| !r.converged) {
        ctx.warn("some eigenvalue estimates did not reach the tolerance");
    }

    let mut out = Output::new(ctx.format);
    out.table(
        "spectrum",
        &["checkpoint_id", "lambda_min", "lambda_max", "residual_min", "residual_max", "converged"],
        &rows,
    )?;
    Ok(out)
}
