//! TOML experiment configuration. Every table rejects unknown keys and falls
//! back to its defaults for missing ones.

use std::path::{Path, PathBuf};

use naggs_core::optimizers::{NagGsConfig, SgdMomentumConfig};
use naggs_core::problems::{load_csv_dataset, synthetic_blobs, DatasetSchema, LogisticRegressionProblem};
use naggs_core::sde_lab::{EnsembleMethod, QuadraticExperiment, StationarityConfig};
use naggs_core::training::log_grid;
use naggs_core::Optimizer;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, Result};
use crate::output::Format;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub analyze: Option<AnalyzeConfig>,
    pub simulate: Option<SimulateConfig>,
    pub stationary: Option<StationarySection>,
    pub train: Option<TrainSection>,
    pub spectrum: Option<SpectrumSection>,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    /// Parses a config file. Relative dataset paths are resolved against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::ReadConfig { path: path.to_path_buf(), source })?;
        let mut cfg: Self = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for data in [
            cfg.train.as_mut().map(|t| &mut t.data),
            cfg.spectrum.as_mut().map(|s| &mut s.data),
            cfg.sweep.as_mut().and_then(|s| match &mut s.objective {
                SweepObjective::Logistic { data } => Some(data),
                SweepObjective::Quadratic { .. } => None,
            }),
        ]
        .into_iter()
        .flatten()
        {
            if let DataSpec::Csv(c) = data {
                if c.path.is_relative() {
                    c.path = base.join(&c.path);
                }
            }
        }
        Ok(cfg)
    }
}

/// Either an explicit list or `points` values spanning `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Log,
    Linear,
}

impl GridSpec {
    pub fn range(min: f64, max: f64, points: usize) -> Self {
        GridSpec::Range(GridRange { min, max, points, scale: Scale::Log })
    }

    /// Grid values; every value must be positive and finite.
    pub fn positive_values(&self, what: &str) -> Result<Vec<f64>> {
        let values = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => match r.scale {
                Scale::Log => log_grid(r.min, r.max, r.points)?,
                Scale::Linear => {
                    if !(r.min <= r.max && r.min.is_finite() && r.max.is_finite()) || r.points == 0 {
                        return config_err(format!("{what}: invalid range [{}, {}]", r.min, r.max));
                    }
                    let step = if r.points > 1 { (r.max - r.min) / (r.points - 1) as f64 } else { 0.0 };
                    (0..r.points)
                        .map(|i| if i + 1 == r.points { r.max } else { r.min + step * i as f64 })
                        .collect()
                }
            },
        };
        if values.is_empty() || !values.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return config_err(format!("{what} must be a non-empty set of positive values"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
    /// Noise level for the stationary covariance table.
    pub sigma: f64,
    pub alphas: GridSpec,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { mu: 1.0, l: 3.0, gamma: 1.0, sigma: 1.0, alphas: GridSpec::range(1e-2, 1e2, 201) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub methods: Vec<EnsembleMethod>,
    pub dim: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub c: f64,
    pub sigma: f64,
    pub gamma0: f64,
    pub alphas: GridSpec,
    pub n_points: usize,
    pub n_steps: usize,
    pub record_every: Option<usize>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            methods: vec![EnsembleMethod::NagGs],
            dim: 3,
            mu: 1.0,
            l: 1.9,
            c: 5.0,
            sigma: 1.0,
            gamma0: 1.0,
            alphas: GridSpec::List(vec![0.5, 1.0, 2.0, 5.29]),
            n_points: 2000,
            n_steps: 300,
            record_every: None,
        }
    }
}

impl SimulateConfig {
    pub fn experiment(&self) -> Result<QuadraticExperiment> {
        if self.methods.is_empty() {
            return config_err("simulate.methods must not be empty");
        }
        let exp = QuadraticExperiment {
            dim: self.dim,
            mu: self.mu,
            l: self.l,
            c: self.c,
            sigma: self.sigma,
            gamma0: self.gamma0,
            alphas: self.alphas.positive_values("simulate.alphas")?,
            n_points: self.n_points,
            n_steps: self.n_steps,
            record_every: self.record_every,
        };
        exp.validate()?;
        Ok(exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryPreset {
    #[default]
    TwoPit,
    FmSin,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySection {
    pub preset: StationaryPreset,
    /// Full study definition; required by, and only allowed with, `preset = "custom"`.
    pub custom: Option<StationarityConfig>,
    pub n_points: Option<usize>,
    pub n_steps: Option<usize>,
    pub record_every: Option<usize>,
    pub n_reference: Option<usize>,
}

impl StationarySection {
    pub fn resolve(&self) -> Result<StationarityConfig> {
        let mut cfg = match (self.preset, &self.custom) {
            (StationaryPreset::Custom, Some(c)) => c.clone(),
            (StationaryPreset::Custom, None) => return config_err("preset \"custom\" needs a [stationary.custom] table"),
            (_, Some(_)) => return config_err("[stationary.custom] requires preset = \"custom\""),
            (StationaryPreset::TwoPit, None) => StationarityConfig::two_pit(),
            (StationaryPreset::FmSin, None) => StationarityConfig::fm_sin(),
        };
        if let Some(n) = self.n_points {
            cfg.n_points = n;
        }
        if let Some(n) = self.n_steps {
            cfg.n_steps = n;
        }
        if self.record_every.is_some() {
            cfg.record_every = self.record_every;
        }
        if let Some(n) = self.n_reference {
            cfg.n_reference = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Logistic-regression data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Blobs(BlobsSpec),
    Csv(CsvSpec),
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Blobs(BlobsSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsSpec {
    pub n_per_class: usize,
    pub n_features: usize,
    pub separation: f64,
    pub l2_reg: f64,
    /// Generator seed; the run seed when absent.
    pub seed: Option<u64>,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self { n_per_class: 200, n_features: 10, separation: 3.0, l2_reg: 1e-3, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSpec {
    pub path: PathBuf,
    pub schema: DatasetSchema,
}

impl DataSpec {
    pub fn load(&self, seed: u64) -> Result<LogisticRegressionProblem> {
        match self {
            DataSpec::Blobs(b) => {
                if !(b.separation.is_finite() && b.l2_reg >= 0.0 && b.l2_reg.is_finite()) {
                    return config_err("blobs: separation must be finite and l2_reg non-negative");
                }
                Ok(synthetic_blobs(b.n_per_class, b.n_features, b.separation, b.l2_reg, b.seed.unwrap_or(seed))?)
            }
            DataSpec::Csv(c) => {
                if !c.path.is_file() {
                    return config_err(format!("dataset {} does not exist", c.path.display()));
                }
                Ok(load_csv_dataset(&c.path, &c.schema)?)
            }
        }
    }
}

/// Train/test split of a loaded dataset; no test set when `test_fraction` is 0.
pub fn split_data(
    data: LogisticRegressionProblem,
    test_fraction: f64,
    seed: u64,
) -> Result<(LogisticRegressionProblem, Option<LogisticRegressionProblem>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return config_err(format!("test_fraction must lie in [0, 1), got {test_fraction}"));
    }
    if test_fraction == 0.0 {
        return Ok((data, None));
    }
    let (train, test) = data.split(test_fraction, seed)?;
    Ok((train, Some(test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub data: DataSpec,
    pub test_fraction: f64,
    pub epochs: usize,
    /// Full batch when absent.
    pub batch_size: Option<usize>,
    pub lrs: GridSpec,
    pub optimizers: Vec<Optimizer>,
    /// Replace `mu` and `gamma0` of NAG optimizers by the largest eigenvalue
    /// of the training Hessian at `w = 0`.
    pub mu_from_hessian: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            test_fraction: 0.2,
            epochs: 50,
            batch_size: Some(32),
            lrs: GridSpec::range(1e-2, 1e3, 10),
            optimizers: vec![
                Optimizer::NagGs(NagGsConfig::new(1.0, 1.0, 1.0).expect("valid defaults")),
                Optimizer::SgdMomentum(SgdMomentumConfig { lr: 1.0, momentum: 0.9, weight_decay: 0.0 }),
            ],
            mu_from_hessian: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub data: DataSpec,
    /// Parameter vectors to analyse. When absent the model is trained with
    /// `optimizer` and every epoch is a checkpoint.
    pub checkpoints: Option<Vec<Vec<f64>>>,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            checkpoints: None,
            optimizer: Optimizer::SgdMomentum(SgdMomentumConfig { lr: 0.5, momentum: 0.9, weight_decay: 0.0 }),
            epochs: 20,
            batch_size: Some(32),
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Alpha,
    Gamma,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    LogUniform,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: Axis,
    pub sampling: Sampling,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepObjective {
    /// `½ (x − c·e)ᵀ diag(eigenvalues) (x − c·e)` from `x = 0`; the metric is `‖x − c·e‖`.
    Quadratic { eigenvalues: Vec<f64>, c: f64 },
    /// Full-batch logistic regression from `w = 0`; the metric is the final loss.
    Logistic { data: DataSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<AxisSpec>,
    pub n_trials: usize,
    /// Optimizer steps per trial.
    pub budget: usize,
    /// Values of the axes that are not swept.
    pub alpha: f64,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub objective: SweepObjective,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            axes: vec![
                AxisSpec { name: Axis::Alpha, sampling: Sampling::LogUniform, low: 1e-2, high: 1e2 },
                AxisSpec { name: Axis::Mu, sampling: Sampling::Uniform, low: -10.0, high: 10.0 },
            ],
            n_trials: 200,
            budget: 500,
            alpha: 1.0,
            gamma: 1.0,
            mu: 1.0,
            sigma: 0.0,
            objective: SweepObjective::Quadratic { eigenvalues: vec![1.0, 10.0], c: 1.0 },
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 3 {
            return config_err("sweep needs between 1 and 3 axes");
        }
        for (i, a) in self.axes.iter().enumerate() {
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return config_err(format!("sweep axis {:?} listed twice", a.name));
            }
            if !(a.low < a.high && a.low.is_finite() && a.high.is_finite()) {
                return config_err(format!("sweep axis {:?}: need low < high, got [{}, {}]", a.name, a.low, a.high));
            }
            if a.sampling == Sampling::LogUniform && a.low <= 0.0 {
                return config_err(format!("sweep axis {:?}: log_uniform needs low > 0", a.name));
            }
            if a.name != Axis::Mu && a.low <= 0.0 {
                return config_err(format!("sweep axis {:?} must stay positive", a.name));
            }
        }
        if self.n_trials == 0 || self.budget == 0 {
            return config_err("sweep n_trials and budget must be positive");
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0 && self.mu.is_finite() && self.sigma >= 0.0 && self.sigma.is_finite()) {
            return config_err("sweep needs alpha > 0, gamma > 0, finite mu and sigma >= 0");
        }
        if let SweepObjective::Quadratic { eigenvalues, c } = &self.objective {
            if eigenvalues.is_empty() || !eigenvalues.iter().all(|l| *l >= 0.0 && l.is_finite()) || !c.is_finite() {
                return config_err("sweep quadratic needs non-negative eigenvalues and a finite c");
            }
        }
        Ok(())
    }
}
