//! One-dimensional distances between sample sets, and Gibbs stationary densities.

mod density;

pub use density::StationaryDensity;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const JITTER_SEED: u64 = 0x6b6e_6e5f_6b6c;

/// Sorted finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Estimator("empty sample".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// `sup_x |F_a(x) − F_b(x)|` of the empirical CDFs.
pub fn ks_statistic(a: &SampleSet, b: &SampleSet) -> f64 {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `∫ |F_a(x) − F_b(x)| dx`, exact for empirical CDFs.
pub fn wasserstein1(a: &SampleSet, b: &SampleSet) -> f64 {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = xa[0].min(xb[0]);
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        prev = x;
    }
    total
}

/// Distance from `x` to its `k`-th nearest neighbour in sorted `s`, skipping
/// index `skip` if given.
fn kth_neighbour(s: &[f64], x: f64, k: usize, skip: Option<usize>) -> f64 {
    let pos = s.partition_point(|&v| v < x);
    let mut left = pos as isize - 1;
    let mut right = pos;
    let mut dist = f64::NAN;
    for _ in 0..k {
        if left >= 0 && Some(left as usize) == skip {
            left -= 1;
        }
        if Some(right) == skip {
            right += 1;
        }
        let dl = if left >= 0 { x - s[left as usize] } else { f64::INFINITY };
        let dr = if right < s.len() { s[right] - x } else { f64::INFINITY };
        if dl.is_infinite() && dr.is_infinite() {
            return f64::NAN;
        }
        if dl <= dr {
            dist = dl;
            left -= 1;
        } else {
            dist = dr;
            right += 1;
        }
    }
    dist
}

fn jittered(s: &SampleSet, scale: f64, stream: u64) -> Vec<f64> {
    let mut r = rng::stream(JITTER_SEED, stream);
    let mut v: Vec<f64> = s.values().iter().map(|x| x + scale * r.random_range(-1.0..=1.0)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// k-nearest-neighbour estimate of `KL(a ‖ b)` for 1-D samples:
/// `(1/n) Σ log(ν_k(i)/ρ_k(i)) + log(m/(n−1))`, where `ρ_k(i)` is the
/// distance from `aᵢ` to its k-th neighbour in `a` and `ν_k(i)` to its k-th
/// neighbour in `b`. Both samples receive a deterministic uniform jitter of
/// width `1e-12·scale` to break ties.
pub fn kl_divergence_knn(a: &SampleSet, b: &SampleSet, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Estimator("k must be positive".into()));
    }
    let (n, m) = (a.len(), b.len());
    if n < k + 1 || m < k + 1 {
        return Err(Error::Estimator(format!("need at least {} samples in each set", k + 1)));
    }
    let scale = a
        .values()
        .iter()
        .chain(b.values())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let xa = jittered(a, 1e-12 * scale, 0);
    let xb = jittered(b, 1e-12 * scale, 1);
    let mut sum = 0.0;
    for (i, &x) in xa.iter().enumerate() {
        let rho = kth_neighbour(&xa, x, k, Some(i));
        let nu = kth_neighbour(&xb, x, k, None);
        if !(rho > 0.0 && nu > 0.0) {
            return Err(Error::Estimator(format!("zero neighbour distance at sample {i}")));
        }
        sum += (nu / rho).ln();
    }
    Ok(sum / n as f64 + (m as f64 / (n as f64 - 1.0)).ln())
}
