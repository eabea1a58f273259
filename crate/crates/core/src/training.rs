//! Epoch-based training of logistic regression and learning-rate grids.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{GradientOracle, Optimizer};
use crate::problems::{Batch, LogisticRegressionProblem};
use crate::rng;

/// Weights beyond this magnitude count as divergence.
const WEIGHT_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Minibatch size; full batch when absent.
    #[serde(default)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub optimizer: String,
    pub lr: f64,
    /// Epoch 0 holds the initial model.
    pub records: Vec<EpochRecord>,
    pub diverged: bool,
}

impl TrainRun {
    /// Finished without divergence and with a final training loss that is
    /// finite and below the initial one.
    pub fn converged(&self) -> bool {
        let (Some(first), Some(last)) = (self.records.first(), self.records.last()) else {
            return false;
        };
        !self.diverged && last.train_loss.is_finite() && last.train_loss < first.train_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.train_loss)
    }
}

/// Minibatch view of a logistic problem as a gradient oracle.
struct BatchOracle<'a> {
    problem: &'a LogisticRegressionProblem,
    rows: &'a [usize],
}

impl GradientOracle for BatchOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.param_dim()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self.problem.loss_grad(x, Batch::Indices(self.rows)) {
            Ok((_, g)) => out.copy_from_slice(&g),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn hessian_apply(&self, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.problem.hessian_apply_batch(x, d, Batch::Indices(self.rows))?);
        Ok(())
    }
}

fn record(epoch: usize, w: &[f64], train: &LogisticRegressionProblem, test: Option<&LogisticRegressionProblem>) -> Result<EpochRecord> {
    let loss = |p: &LogisticRegressionProblem| p.loss_grad(w, Batch::Full).map(|(l, _)| l);
    Ok(EpochRecord {
        epoch,
        train_loss: loss(train)?,
        train_accuracy: train.accuracy(w)?,
        test_loss: test.map(loss).transpose()?,
        test_accuracy: test.map(|t| t.accuracy(w)).transpose()?,
    })
}

/// Trains from `w = 0` without injected noise. Minibatches are reshuffled
/// every epoch from `seed`. Training stops at the first divergence.
pub fn train_logistic(
    train: &LogisticRegressionProblem,
    test: Option<&LogisticRegressionProblem>,
    optimizer: &Optimizer,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainRun> {
    train_logistic_with(train, test, optimizer, cfg, seed, |_, _| Ok(()))
}

/// [`train_logistic`] with a hook called on the weights after every recorded
/// epoch, starting with epoch 0.
pub fn train_logistic_with(
    train: &LogisticRegressionProblem,
    test: Option<&LogisticRegressionProblem>,
    optimizer: &Optimizer,
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, &[f64]) -> Result<()>,
) -> Result<TrainRun> {
    let n = train.n_samples;
    let batch = cfg.batch_size.unwrap_or(n);
    if batch == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let mut st = optimizer.init(vec![0.0; train.param_dim()])?;
    let mut records = vec![record(0, st.x(), train, test)?];
    on_epoch(0, st.x())?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = rng::stream(seed, 0);
    let mut diverged = false;
    'epochs: for epoch in 1..=cfg.epochs {
        if batch < n {
            order.shuffle(&mut shuffler);
        }
        for rows in order.chunks(batch) {
            optimizer.step(&mut st, &BatchOracle { problem: train, rows }, None)?;
            if st.diverged || st.x().iter().any(|v| v.abs() > WEIGHT_LIMIT) {
                diverged = true;
                break 'epochs;
            }
        }
        let rec = record(epoch, st.x(), train, test)?;
        let finite = rec.train_loss.is_finite();
        records.push(rec);
        if !finite {
            diverged = true;
            break;
        }
        on_epoch(epoch, st.x())?;
    }
    Ok(TrainRun { optimizer: optimizer.name().into(), lr: optimizer.learning_rate(), records, diverged })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) || n == 0 {
        return Err(Error::InvalidConfig(format!("invalid log grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// One run per learning rate, in grid order.
pub fn lr_sweep(
    train: &LogisticRegressionProblem,
    test: Option<&LogisticRegressionProblem>,
    base: &Optimizer,
    lrs: &[f64],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<TrainRun>> {
    lrs.par_iter()
        .map(|&lr| train_logistic(train, test, &base.with_learning_rate(lr)?, cfg, seed))
        .collect()
}

/// Largest learning rate among converged runs.
pub fn largest_converged_lr(runs: &[TrainRun]) -> Option<f64> {
    runs.iter().filter(|r| r.converged()).map(|r| r.lr).fold(None, |m, lr| Some(m.map_or(lr, |v: f64| v.max(lr))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{NagGsConfig, SgdMomentumConfig};
    use crate::problems::synthetic_blobs;

    fn sgd(lr: f64) -> Optimizer {
        Optimizer::SgdMomentum(SgdMomentumConfig { lr, momentum: 0.9, weight_decay: 0.0 })
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let g = log_grid(0.1, 100.0, 10).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[9], 100.0);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 10f64.powf(1.0 / 3.0)).abs() < 1e-12);
        }
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn full_batch_training_reduces_loss() {
        let p = synthetic_blobs(100, 5, 3.0, 1e-3, 1).unwrap();
        let (train, test) = p.split(0.25, 2).unwrap();
        let run = train_logistic(&train, Some(&test), &sgd(0.5), &TrainConfig { epochs: 50, batch_size: None }, 3).unwrap();
        assert_eq!(run.records.len(), 51);
        assert!((run.records[0].train_loss - 2f64.ln()).abs() < 1e-12);
        assert!(run.converged());
        assert!(run.records.last().unwrap().test_accuracy.unwrap() > 0.85);
    }

    #[test]
    fn minibatches_are_seeded() {
        let p = synthetic_blobs(60, 4, 2.0, 1e-2, 4).unwrap();
        let cfg = TrainConfig { epochs: 5, batch_size: Some(16) };
        let opt = Optimizer::NagGs(NagGsConfig::new(0.5, 0.1, 0.1).unwrap());
        let a = train_logistic(&p, None, &opt, &cfg, 9).unwrap();
        assert_eq!(a, train_logistic(&p, None, &opt, &cfg, 9).unwrap());
        assert_ne!(a, train_logistic(&p, None, &opt, &cfg, 10).unwrap());
    }

    #[test]
    fn divergence_stops_training() {
        let p = synthetic_blobs(50, 3, 2.0, 1.0, 5).unwrap();
        let run = train_logistic(&p, None, &sgd(50.0), &TrainConfig { epochs: 200, batch_size: None }, 1).unwrap();
        assert!(run.diverged && !run.converged());
        assert!(run.records.len() < 201);
    }

    #[test]
    fn epoch_hook_sees_every_recorded_epoch() {
        let p = synthetic_blobs(30, 3, 3.0, 1e-2, 7).unwrap();
        let mut seen = Vec::new();
        let run = train_logistic_with(&p, None, &sgd(0.5), &TrainConfig { epochs: 4, batch_size: None }, 1, |e, w| {
            seen.push((e, w.to_vec()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert!(seen[0].1.iter().all(|w| *w == 0.0));
        assert_eq!(run, train_logistic(&p, None, &sgd(0.5), &TrainConfig { epochs: 4, batch_size: None }, 1).unwrap());
    }

    #[test]
    fn sweep_keeps_grid_order() {
        let p = synthetic_blobs(40, 3, 3.0, 1e-2, 6).unwrap();
        let lrs = [0.01, 0.1, 1.0];
        let runs = lr_sweep(&p, None, &sgd(1.0), &lrs, &TrainConfig { epochs: 5, batch_size: None }, 1).unwrap();
        assert_eq!(runs.iter().map(|r| r.lr).collect::<Vec<_>>(), lrs);
        assert_eq!(largest_converged_lr(&runs), Some(1.0));
    }
}
