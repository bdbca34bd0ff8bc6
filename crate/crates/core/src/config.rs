//! Run configuration: a TOML file with one section per concern. Unknown keys
//! are rejected everywhere.

use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::adjoint::LossSpec;
use crate::architecture::{
    build_autoencoder_schedule, build_encoder_schedule, build_plain_schedule, build_unet_schedule, LayerSchedule,
    TimeGrid,
};
use crate::data_io::{gen_gaussian_classification, gen_parabola, load_dataset, load_mnist_idx, Dataset, DatasetKind};
use crate::diagnostics::HessianProbe;
use crate::dynamics::{Activation, Network};
use crate::error::{Error, Result};
use crate::trainer::TrainerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify2d,
    Parabola,
    Mnist,
}

impl Task {
    pub fn dataset_kind(self) -> DatasetKind {
        match self {
            Task::Classify2d => DatasetKind::Classify2d,
            Task::Parabola => DatasetKind::Parabola,
            Task::Mnist => DatasetKind::Mnist,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    Plain,
    Encoder,
    Autoencoder,
    Unet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    SmoothRelu,
    SmoothLeakyRelu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub kind: ArchitectureKind,
    /// Plain networks: state dimension. Defaults to the input dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// `[width, layers]` per encoder phase.
    #[serde(default)]
    pub encoder: Vec<[usize; 2]>,
    #[serde(default)]
    pub bottleneck_layers: usize,
    /// `[width, layers]` per decoder phase.
    #[serde(default)]
    pub decoder: Vec<[usize; 2]>,
    #[serde(default)]
    pub unet_widths: Vec<usize>,
    /// Component `k` of the built schedule becomes component `relabel[k]`.
    #[serde(default)]
    pub relabel: Vec<usize>,
    /// `variance`: relabel so that the coordinates kept longest are the
    /// input coordinates with the largest sample variance.
    #[serde(default)]
    pub order: CoordinateOrder,
    pub activation: ActivationKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateOrder {
    #[default]
    Index,
    Variance,
}

/// Coordinates sorted by decreasing sample variance of `inputs`, ties by
/// index; coordinates past the input dimension keep their place.
pub fn variance_order(inputs: &Array2<f64>, dim: usize) -> Vec<usize> {
    let var = inputs.var_axis(Axis(0), 0.0);
    let mut perm: Vec<usize> = (0..var.len()).collect();
    perm.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    perm.extend(var.len()..dim);
    perm
}

fn default_alpha() -> f64 {
    0.1
}

fn default_sharpness() -> f64 {
    crate::dynamics::DEFAULT_SHARPNESS
}

impl ArchitectureConfig {
    pub fn activation(&self) -> Result<Activation> {
        let act = match self.activation {
            ActivationKind::Tanh => Activation::Tanh,
            ActivationKind::SmoothRelu => Activation::SmoothRelu {
                sharpness: self.sharpness,
            },
            ActivationKind::SmoothLeakyRelu => Activation::SmoothLeakyRelu {
                alpha: self.alpha,
                sharpness: self.sharpness,
            },
        };
        act.check().map_err(|m| Error::Config(format!("architecture: {m}")))?;
        Ok(act)
    }

    pub fn schedule(&self, grid: &TimeGrid, input_dim: usize) -> Result<LayerSchedule> {
        let pairs = |v: &[[usize; 2]]| v.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        let schedule = match self.kind {
            ArchitectureKind::Plain => build_plain_schedule(self.dim.unwrap_or(input_dim), grid)?,
            ArchitectureKind::Encoder => build_encoder_schedule(&pairs(&self.encoder), grid)?,
            ArchitectureKind::Autoencoder => build_autoencoder_schedule(
                &pairs(&self.encoder),
                self.bottleneck_layers,
                &pairs(&self.decoder),
                grid,
            )?,
            ArchitectureKind::Unet => build_unet_schedule(&self.unet_widths, grid)?,
        };
        if self.relabel.is_empty() {
            Ok(schedule)
        } else {
            schedule.relabel(&self.relabel)
        }
    }
}

/// Any two of `dt`, `horizon` and `n_steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

impl GridConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("grid.dt must be positive, got {dt}")));
            }
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("grid.horizon must be positive, got {t}")));
            }
        }
        if self.n_steps == Some(0) {
            return Err(Error::Config("grid.n_steps must be at least 1".into()));
        }
        match (self.dt, self.horizon, self.n_steps) {
            (Some(dt), Some(t), None) => TimeGrid::new(t, dt),
            (Some(dt), None, Some(n)) => TimeGrid::from_steps(dt, n),
            (None, Some(t), Some(n)) => TimeGrid::from_steps(t / n as f64, n),
            _ => Err(Error::Config("grid: set exactly two of dt, horizon and n_steps".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Sample count for the synthetic tasks.
    pub n: usize,
    /// Generator seed; the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub x_range: [f64; 2],
    /// IDX files for the MNIST task, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Seeded train/test split; the whole dataset trains when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n: 500,
            seed: None,
            x_range: [-1.0, 1.0],
            images: None,
            labels: None,
            limit: None,
            train_fraction: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMethod {
    Dense,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub grad_h: f64,
    pub grad_tol: f64,
    /// Coefficients compared by the gradient check.
    pub grad_coords: usize,
    /// Particles used by the gradient check.
    pub grad_samples: usize,
    pub hessian: HessianMethod,
    pub hessian_tol: f64,
    pub hessian_max_iter: usize,
    /// Record Hessian extremes every this many outer steps while training (0: off).
    pub hessian_every: usize,
    /// Neighbourhood radius; the 5th percentile of initial distances when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_eps: Option<f64>,
    pub centers_k: usize,
    /// Particles used by the entropy profiles.
    pub entropy_samples: usize,
    /// Particles used by the step-size profile.
    pub lip_samples: usize,
    pub zero_tol: f64,
    /// Latent node; the schedule's bottleneck node when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_node: Option<usize>,
    /// Particles per measure in the Wasserstein check.
    pub w1_samples: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            grad_h: 1e-5,
            grad_tol: 1e-6,
            grad_coords: 200,
            grad_samples: 5,
            hessian: HessianMethod::Dense,
            hessian_tol: 1e-6,
            hessian_max_iter: 500,
            hessian_every: 0,
            entropy_eps: None,
            centers_k: 10,
            entropy_samples: 500,
            lip_samples: 500,
            zero_tol: 1e-8,
            latent_node: None,
            w1_samples: 256,
        }
    }
}

impl DiagnosticsConfig {
    pub fn hessian_probe(&self, seed: u64) -> HessianProbe {
        match self.hessian {
            HessianMethod::Dense => HessianProbe::DenseFd,
            HessianMethod::Power => HessianProbe::PowerIteration {
                max_iter: self.hessian_max_iter,
                seed,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Training history CSV; `history.csv` beside the checkpoint when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    /// Dataset file used instead of the task's generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub architecture: ArchitectureConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Everything a run needs, built from a config.
#[derive(Clone, Debug)]
pub struct Problem {
    pub net: Network,
    pub dataset: Dataset,
    pub loss: LossSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Canonical text stored in checkpoint provenance.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.grid()?;
        self.architecture.activation()?;
        if self.architecture.order == CoordinateOrder::Variance && !self.architecture.relabel.is_empty() {
            return Err(Error::Config("architecture: set at most one of relabel and order".into()));
        }
        self.trainer.validate()?;
        let d = &self.diagnostics;
        if !(d.grad_h > 0.0 && d.grad_tol > 0.0 && d.hessian_tol > 0.0) {
            return Err(Error::Config("diagnostics: steps and tolerances must be positive".into()));
        }
        if d.grad_samples == 0 || d.lip_samples == 0 || d.entropy_samples == 0 || d.w1_samples == 0 || d.centers_k == 0 {
            return Err(Error::Config("diagnostics: sample counts must be positive".into()));
        }
        if let Some(f) = self.data.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("data.train_fraction must lie in (0, 1), got {f}")));
            }
        }
        if self.task != Task::Mnist && self.paths.data.is_none() && self.data.n == 0 {
            return Err(Error::Config("data.n must be at least 1".into()));
        }
        Ok(())
    }

    /// Rewrites relative paths as absolute ones so the config text stays
    /// valid when stored away from its file.
    pub fn absolutize(&mut self) {
        let abs = |p: &mut Option<PathBuf>, base: &Path| {
            if let Some(path) = p {
                if path.is_relative() {
                    let joined = base.join(&*path);
                    *path = std::fs::canonicalize(&joined).unwrap_or(joined);
                }
            }
        };
        let base = self.base_dir.clone();
        abs(&mut self.data.images, &base);
        abs(&mut self.data.labels, &base);
        abs(&mut self.paths.data, &base);
        abs(&mut self.paths.history, &base);
    }

    /// `(train, test)` under `data.train_fraction`, split with the run seed.
    pub fn split(&self, dataset: Dataset) -> Result<(Dataset, Option<Dataset>)> {
        match self.data.train_fraction {
            None => Ok((dataset, None)),
            Some(f) => {
                let (train, test) = dataset.split(f, self.seed)?;
                Ok((train, Some(test)))
            }
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.seed)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Dataset named by `paths.data`, else the task's generator or IDX files.
    pub fn dataset(&self) -> Result<Dataset> {
        if let Some(p) = &self.paths.data {
            return load_dataset(self.resolve(p));
        }
        match self.task {
            Task::Classify2d => gen_gaussian_classification(self.data.n, self.data_seed()),
            Task::Parabola => gen_parabola(self.data.n, self.data_seed(), (self.data.x_range[0], self.data.x_range[1])),
            Task::Mnist => {
                let (Some(images), Some(labels)) = (&self.data.images, &self.data.labels) else {
                    return Err(Error::Config("mnist task needs data.images and data.labels".into()));
                };
                load_mnist_idx(self.resolve(images), self.resolve(labels), self.data.limit)
            }
        }
    }

    /// Network for inputs of dimension `input_dim`. A variance order needs
    /// the data and goes through [`RunConfig::network_for`].
    pub fn network(&self, input_dim: usize) -> Result<Network> {
        self.build_network(input_dim, None)
    }

    pub fn network_for(&self, dataset: &Dataset) -> Result<Network> {
        self.build_network(dataset.input_dim(), Some(&dataset.inputs))
    }

    fn build_network(&self, input_dim: usize, inputs: Option<&Array2<f64>>) -> Result<Network> {
        let grid = self.grid.grid()?;
        let mut schedule = self.architecture.schedule(&grid, input_dim)?;
        if schedule.dim() < input_dim {
            return Err(Error::Config(format!(
                "state dimension {} is smaller than the input dimension {input_dim}",
                schedule.dim()
            )));
        }
        if self.architecture.order == CoordinateOrder::Variance {
            let inputs = inputs.ok_or_else(|| Error::Config("architecture.order = \"variance\" needs a dataset".into()))?;
            schedule = schedule.relabel(&variance_order(inputs, schedule.dim()))?;
        }
        Network::new(grid, schedule, self.architecture.activation()?)
    }

    /// Network and loss matched to `dataset`.
    pub fn problem_for(&self, dataset: Dataset) -> Result<Problem> {
        let net = self.network_for(&dataset)?;
        let loss = LossSpec::for_schedule(net.schedule(), dataset.target_dim())?;
        Ok(Problem { net, dataset, loss })
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_for(self.dataset()?)
    }
}

/// Shipped configurations, by name.
pub const PRESETS: [(&str, &str); 5] = [
    ("classify2d", include_str!("../configs/classify2d.toml")),
    ("classify2d_unnatural", include_str!("../configs/classify2d_unnatural.toml")),
    ("parabola20", include_str!("../configs/parabola20.toml")),
    ("parabola40", include_str!("../configs/parabola40.toml")),
    ("mnist", include_str!("../configs/mnist.toml")),
];

/// A shipped configuration, with relative paths resolved against the
/// `configs` directory of this crate.
pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    let mut cfg = RunConfig::from_toml(text)?;
    cfg.base_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    Ok(cfg)
}
