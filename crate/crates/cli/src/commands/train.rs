use naggs_core::problems::LogisticRegressionProblem;
use naggs_core::spectrum::{extreme_eigenvalues, HessianOperator};
use naggs_core::training::{largest_converged_lr, lr_sweep, TrainConfig};
use naggs_core::Optimizer;
use serde::Serialize;

use super::{unique_labels, Ctx};
use crate::config::{split_data, TrainSection};
use crate::error::Result;
use crate::output::Output;

#[derive(Serialize)]
struct EpochRow<'a> {
    optimizer: &'a str,
    lr: f64,
    epoch: usize,
    train_loss: f64,
    train_accuracy: f64,
    test_loss: Option<f64>,
    test_accuracy: Option<f64>,
    diverged: bool,
}

#[derive(Serialize)]
struct RunSummary {
    lr: f64,
    converged: bool,
    diverged: bool,
    final_loss: f64,
}

#[derive(Serialize)]
struct OptimizerSummary<'a> {
    optimizer: &'a str,
    config: &'a Optimizer,
    largest_converged_lr: Option<f64>,
    runs: Vec<RunSummary>,
}

/// Largest eigenvalue of the full training Hessian at `w = 0`.
pub(crate) fn curvature_at_origin(train: &LogisticRegressionProblem, seed: u64) -> Result<f64> {
    let op = HessianOperator::new(train, vec![0.0; train.param_dim()])?;
    let (_, top) = extreme_eigenvalues(&op, 1e-10, 1_000_000, seed)?;
    Ok(top.value)
}

/// Learning-rate grid for every configured optimizer on one train/test split.
pub fn run(cfg: &TrainSection, ctx: &Ctx) -> Result<Output> {
    let lrs = cfg.lrs.positive_values("train.lrs")?;
    if cfg.optimizers.is_empty() {
        return crate::error::config_err("train.optimizers must not be empty");
    }
    for o in &cfg.optimizers {
        o.with_learning_rate(lrs[0])?;
    }
    let tc = TrainConfig { epochs: cfg.epochs, batch_size: cfg.batch_size };
    let (train, test) = split_data(cfg.data.load(ctx.seed)?, cfg.test_fraction, ctx.seed)?;

    let mut optimizers = cfg.optimizers.clone();
    if cfg.mu_from_hessian {
        let top = curvature_at_origin(&train, ctx.seed)?;
        ctx.info(&format!("NAG curvature from Hessian at w = 0: {top:.6}"));
        for o in &mut optimizers {
            match o {
                Optimizer::NagGs(c) => (c.mu, c.gamma0) = (top, top),
                Optimizer::NagFi(c) => (c.mu, c.gamma0) = (top, top),
                _ => {}
            }
        }
    }

    let labels = unique_labels(optimizers.iter().map(|o| o.name()));
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let all_runs: Vec<_> = optimizers
        .iter()
        .map(|o| lr_sweep(&train, test.as_ref(), o, &lrs, &tc, ctx.seed))
        .collect::<naggs_core::Result<_>>()?;
    for ((opt, label), runs) in optimizers.iter().zip(&labels).zip(&all_runs) {
        for run in runs {
            for r in &run.records {
                rows.push(EpochRow {
                    optimizer: label,
                    lr: run.lr,
                    epoch: r.epoch,
                    train_loss: r.train_loss,
                    train_accuracy: r.train_accuracy,
                    test_loss: r.test_loss,
                    test_accuracy: r.test_accuracy,
                    diverged: run.diverged,
                });
            }
        }
        let largest = largest_converged_lr(runs);
        ctx.info(&format!("{label}: largest converged lr {largest:?}"));
        summaries.push(OptimizerSummary {
            optimizer: label,
            config: opt,
            largest_converged_lr: largest,
            runs: runs
                .iter()
                .map(|r| RunSummary { lr: r.lr, converged: r.converged(), diverged: r.diverged, final_loss: r.final_loss() })
                .collect(),
        });
    }

    let mut out = Output::new(ctx.format);
    out.table(
        "train",
        &["optimizer", "lr", "epoch", "train_loss", "train_accuracy", "test_loss", "test_accuracy", "diverged"],
        &rows,
    )?;
    out.json("summary", &serde_json::json!({ "lrs": lrs, "optimizers": summaries }))?;
    Ok(out)
}
