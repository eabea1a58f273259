use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizers::GradientOracle;
use crate::rng;

/// Binary logistic regression with mean cross-entropy and an L2 penalty
/// `(l2_reg/2)‖w‖²` on every parameter. With a bias the last entry of `w`
/// is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionProblem {
    /// Row-major `n_samples × n_features`.
    pub features: Vec<f64>,
    pub n_samples: usize,
    pub n_features: usize,
    /// Labels in `{0, 1}`.
    pub labels: Vec<f64>,
    pub l2_reg: f64,
    pub includes_bias: bool,
}

/// Rows entering a loss evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Full,
    Indices(&'a [usize]),
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᶻ)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticRegressionProblem {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<f64>,
        l2_reg: f64,
        includes_bias: bool,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidConfig("need at least one feature".into()));
        }
        let n_samples = labels.len();
        check_dim(n_samples * n_features, features.len())?;
        if n_samples == 0 {
            return Err(Error::InvalidConfig("need at least one sample".into()));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
        }
        if !(l2_reg >= 0.0 && l2_reg.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2_reg must be non-negative, got {l2_reg}")));
        }
        Ok(Self { features, n_samples, n_features, labels, l2_reg, includes_bias })
    }

    pub fn param_dim(&self) -> usize {
        self.n_features + usize::from(self.includes_bias)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    fn logit(&self, w: &[f64], i: usize) -> f64 {
        let z: f64 = self.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
        if self.includes_bias {
            z + w[self.n_features]
        } else {
            z
        }
    }

    fn rows<'a>(&self, batch: Batch<'a>) -> Result<Vec<usize>> {
        let idx = match batch {
            Batch::Full => (0..self.n_samples).collect(),
            Batch::Indices(ix) => ix.to_vec(),
        };
        if idx.is_empty() {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n_samples) {
            return Err(Error::InvalidConfig(format!("batch index {bad} out of range")));
        }
        Ok(idx)
    }

    fn add_row(&self, i: usize, scale: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.row(i)) {
            *o += scale * x;
        }
        if self.includes_bias {
            out[self.n_features] += scale;
        }
    }

    /// Mean cross-entropy over the batch plus the L2 term, and its gradient.
    pub fn loss_grad(&self, w: &[f64], batch: Batch<'_>) -> Result<(f64, Vec<f64>)> {
        check_dim(self.param_dim(), w.len())?;
        let idx = self.rows(batch)?;
        let m = idx.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; w.len()];
        for &i in &idx {
            let z = self.logit(w, i);
            let y = self.labels[i];
            loss += softplus(z) - y * z;
            self.add_row(i, (sigmoid(z) - y) / m, &mut grad);
        }
        let sq: f64 = w.iter().map(|v| v * v).sum();
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += self.l2_reg * wi;
        }
        Ok((loss / m + 0.5 * self.l2_reg * sq, grad))
    }

    /// `Xᵀ diag(s(1−s)) X v / m + l2_reg·v`.
    pub fn hessian_apply_batch(&self, w: &[f64], v: &[f64], batch: Batch<'_>) -> Result<Vec<f64>> {
        check_dim(self.param_dim(), w.len())?;
        check_dim(self.param_dim(), v.len())?;
        let idx = self.rows(batch)?;
        let m = idx.len() as f64;
        let mut out: Vec<f64> = v.iter().map(|x| self.l2_reg * x).collect();
        for &i in &idx {
            let s = sigmoid(self.logit(w, i));
            let xv = self.logit(v, i);
            self.add_row(i, s * (1.0 - s) * xv / m, &mut out);
        }
        Ok(out)
    }

    /// Fraction of rows whose thresholded prediction matches the label.
    pub fn accuracy(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.param_dim(), w.len())?;
        let hits = (0..self.n_samples)
            .filter(|&i| (self.logit(w, i) > 0.0) == (self.labels[i] == 1.0))
            .count();
        Ok(hits as f64 / self.n_samples as f64)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n_samples: idx.len(),
            n_features: self.n_features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            l2_reg: self.l2_reg,
            includes_bias: self.includes_bias,
        }
    }

    /// Shuffled train/test split; the test part gets `round(test_fraction·n)` rows.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidConfig(format!("test_fraction must be in [0, 1), got {test_fraction}")));
        }
        let mut idx: Vec<usize> = (0..self.n_samples).collect();
        idx.shuffle(&mut rng::stream(seed, 0));
        let n_test = (test_fraction * self.n_samples as f64).round() as usize;
        if n_test == 0 || n_test == self.n_samples {
            return Err(Error::InvalidConfig("split leaves an empty part".into()));
        }
        let (test, train) = idx.split_at(n_test);
        Ok((self.subset(train), self.subset(test)))
    }
}

impl GradientOracle for LogisticRegressionProblem {
    fn dim(&self) -> usize {
        self.param_dim()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self.loss_grad(x, Batch::Full) {
            Ok((_, g)) => out.copy_from_slice(&g),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn hessian_apply(&self, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.hessian_apply_batch(x, d, Batch::Full)?);
        Ok(())
    }
}

/// Two Gaussian classes with unit covariance and centres `±(separation/2)·u`,
/// `u` a random unit vector. Class 1 occupies the first `n_per_class` rows.
pub fn synthetic_blobs(
    n_per_class: usize,
    n_features: usize,
    separation: f64,
    l2_reg: f64,
    seed: u64,
) -> Result<LogisticRegressionProblem> {
    if n_per_class == 0 || n_features == 0 {
        return Err(Error::InvalidConfig("blobs need at least one sample per class and one feature".into()));
    }
    let mut r = rng::stream(seed, 0);
    let mut u: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut r)).collect();
    let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= nu);
    let mut features = Vec::with_capacity(2 * n_per_class * n_features);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, sign) in [(1.0, 1.0), (0.0, -1.0)] {
        for _ in 0..n_per_class {
            for &uj in &u {
                let noise: f64 = StandardNormal.sample(&mut r);
                features.push(sign * 0.5 * separation * uj + noise);
            }
            labels.push(label);
        }
    }
    LogisticRegressionProblem::new(features, n_features, labels, l2_reg, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_problem(n: usize, d: usize, l2: f64, seed: u64) -> LogisticRegressionProblem {
        let mut r = rng::stream(seed, 0);
        let features = rng::standard_normal_vec(&mut r, n * d);
        let labels = (0..n).map(|i| (i % 2) as f64).collect();
        LogisticRegressionProblem::new(features, d, labels, l2, true).unwrap()
    }

    #[test]
    fn zero_weights_give_log_two() {
        let p = random_problem(10, 3, 0.0, 1);
        let (loss, _) = p.loss_grad(&[0.0; 4], Batch::Full).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn separable_limit_leaves_only_penalty() {
        let p = LogisticRegressionProblem::new(vec![-1.0, -2.0, 1.0, 2.0], 1, vec![0.0, 0.0, 1.0, 1.0], 0.1, false)
            .unwrap();
        let w = [60.0];
        let (loss, _) = p.loss_grad(&w, Batch::Full).unwrap();
        assert!((loss - 0.05 * 3600.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_and_hvp_match_finite_differences() {
        let p = random_problem(20, 5, 0.05, 3);
        let mut r = rng::stream(4, 0);
        let h = 1e-5;
        for _ in 0..20 {
            let w = rng::standard_normal_vec(&mut r, 6);
            let v = rng::standard_normal_vec(&mut r, 6);
            let (_, g) = p.loss_grad(&w, Batch::Full).unwrap();
            let hv = p.hessian_apply_batch(&w, &v, Batch::Full).unwrap();
            let wp: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let wm: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (_, gp) = p.loss_grad(&wp, Batch::Full).unwrap();
            let (_, gm) = p.loss_grad(&wm, Batch::Full).unwrap();
            for i in 0..6 {
                let mut e = vec![0.0; 6];
                e[i] = h;
                let lp = p.loss_grad(&w.iter().zip(&e).map(|(a, b)| a + b).collect::<Vec<_>>(), Batch::Full).unwrap().0;
                let lm = p.loss_grad(&w.iter().zip(&e).map(|(a, b)| a - b).collect::<Vec<_>>(), Batch::Full).unwrap().0;
                assert!(((lp - lm) / (2.0 * h) - g[i]).abs() <= 1e-6);
                assert!(((gp[i] - gm[i]) / (2.0 * h) - hv[i]).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn hvp_is_symmetric_and_reduces_to_penalty() {
        let p = random_problem(15, 4, 0.2, 5);
        let mut r = rng::stream(6, 0);
        let w = rng::standard_normal_vec(&mut r, 5);
        let u = rng::standard_normal_vec(&mut r, 5);
        let v = rng::standard_normal_vec(&mut r, 5);
        let hu = p.hessian_apply_batch(&w, &u, Batch::Full).unwrap();
        let hv = p.hessian_apply_batch(&w, &v, Batch::Full).unwrap();
        let a: f64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
        let b: f64 = hu.iter().zip(&v).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));

        let zero = LogisticRegressionProblem::new(vec![0.0; 6], 3, vec![0.0, 1.0], 0.7, false).unwrap();
        let out = zero.hessian_apply_batch(&[1.0, 2.0, 3.0], &[1.0, -1.0, 2.0], Batch::Full).unwrap();
        assert_eq!(out, vec![0.7, -0.7, 1.4]);
    }

    #[test]
    fn batches_and_errors() {
        let p = random_problem(10, 2, 0.0, 7);
        assert!(p.loss_grad(&[0.0; 3], Batch::Indices(&[])).is_err());
        assert!(p.loss_grad(&[0.0; 3], Batch::Indices(&[10])).is_err());
        assert!(p.loss_grad(&[0.0; 2], Batch::Full).is_err());
        let (l, _) = p.loss_grad(&[0.3, -0.2, 0.1], Batch::Indices(&[2])).unwrap();
        let single = p.subset(&[2]);
        assert_eq!(l, single.loss_grad(&[0.3, -0.2, 0.1], Batch::Full).unwrap().0);
    }

    #[test]
    fn blobs_are_balanced_and_split() {
        let p = synthetic_blobs(50, 3, 6.0, 0.0, 1).unwrap();
        assert_eq!(p.n_samples, 100);
        assert_eq!(p.labels.iter().sum::<f64>(), 50.0);
        let (tr, te) = p.split(0.2, 2).unwrap();
        assert_eq!((tr.n_samples, te.n_samples), (80, 20));
        assert_eq!(synthetic_blobs(50, 3, 6.0, 0.0, 1).unwrap(), p);
    }
}
