use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Top-level experiment description, read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    /// Required when the optimizer is `sfw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionConfig>,
    pub compression: CompressionConfig,
    pub run: RunConfig,
    /// Hyperparameter axes expanded by the `sweep` subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    TwoMoons {
        n: usize,
        noise: f64,
        train_fraction: f64,
    },
    Blobs {
        n: usize,
        classes: usize,
        train_fraction: f64,
    },
    PatternImages {
        n: usize,
        classes: usize,
        size: usize,
        noise: f64,
        train_fraction: f64,
    },
    /// Big-endian IDX image/label pair on disk.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
        train_fraction: f64,
    },
}

impl DatasetConfig {
    pub fn train_fraction(&self) -> f64 {
        match self {
            DatasetConfig::TwoMoons { train_fraction, .. }
            | DatasetConfig::Blobs { train_fraction, .. }
            | DatasetConfig::PatternImages { train_fraction, .. }
            | DatasetConfig::Idx { train_fraction, .. } => *train_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Mlp {
        hidden: Vec<usize>,
    },
    Cnn {
        channels: Vec<usize>,
        kernel: usize,
        #[serde(default)]
        batchnorm: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sfw,
    Sgd,
    SgdGroupPenalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleConfig {
    Constant,
    LinearDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleConfig {
    None,
    Diameter,
    Gradient,
    GradientTheory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub eta0: f64,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_rescale")]
    pub rescale: RescaleConfig,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub group_lambda: f64,
}

fn default_schedule() -> ScheduleConfig {
    ScheduleConfig::LinearDecay
}

fn default_momentum() -> f64 {
    0.9
}

fn default_rescale() -> RescaleConfig {
    RescaleConfig::None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKindConfig {
    L2Ball,
    KSparsePolytope,
    KSupport,
    GroupKSupport,
    SpectralKSupport,
}

/// Per-layer constraint description: a kind, a fractional sparsity budget,
/// and either a diameter multiplier `w` or an explicit radius `tau`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub kind: RegionKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    Magnitude,
    Filter,
    Lowrank,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    pub method: MethodConfig,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    #[serde(default = "default_init_norm_samples")]
    pub init_norm_samples: usize,
    #[serde(default = "default_config_id")]
    pub config_id: String,
}

fn default_init_norm_samples() -> usize {
    16
}

fn default_config_id() -> String {
    "default".to_string()
}

/// Hyperparameter grid for `sweep`: the cross product of the present axes
/// is run, each cell as its own config id.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub k_fractions: Vec<f64>,
    #[serde(default)]
    pub ws: Vec<f64>,
    #[serde(default)]
    pub weight_decays: Vec<f64>,
    #[serde(default)]
    pub group_lambdas: Vec<f64>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let raw = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&raw)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    let bad = |msg: String| Err(HarnessError::Config(msg));
    if cfg.run.seeds.is_empty() {
        return bad("run.seeds must be non-empty".into());
    }
    if cfg.run.epochs == 0 || cfg.run.batch_size == 0 {
        return bad("run.epochs and run.batch_size must be positive".into());
    }
    let frac = cfg.dataset.train_fraction();
    if !(0.0 < frac && frac < 1.0) {
        return bad(format!("train_fraction {frac} must be in (0, 1)"));
    }
    if !(cfg.optimizer.eta0 > 0.0) {
        return bad("optimizer.eta0 must be positive".into());
    }
    if !(0.0..1.0).contains(&cfg.optimizer.momentum) {
        return bad("optimizer.momentum must be in [0, 1)".into());
    }
    match cfg.optimizer.kind {
        OptimizerKind::Sfw => {
            let Some(region) = &cfg.region else {
                return bad("sfw optimizer needs a region block".into());
            };
            match (region.w, region.tau) {
                (Some(_), Some(_)) => {
                    return bad("region: give w or tau, not both".into());
                }
                (None, None) => {
                    return bad("region: one of w or tau is required".into());
                }
                _ => {}
            }
            let needs_k = !matches!(region.kind, RegionKindConfig::L2Ball);
            match region.k_fraction {
                Some(f) if !(0.0 < f && f <= 1.0) => {
                    return bad(format!("region.k_fraction {f} must be in (0, 1]"));
                }
                None if needs_k => {
                    return bad("region.k_fraction required for this region kind".into());
                }
                _ => {}
            }
        }
        OptimizerKind::Sgd | OptimizerKind::SgdGroupPenalty => {
            if cfg.region.is_some() {
                return bad("region block is only valid with the sfw optimizer".into());
            }
        }
    }
    for &t in &cfg.compression.targets {
        if !(0.0..=1.0).contains(&t) {
            return bad(format!("compression target {t} outside [0, 1]"));
        }
    }
    if cfg
        .compression
        .targets
        .windows(2)
        .any(|w| w[0] > w[1])
    {
        return bad("compression.targets must be sorted ascending".into());
    }
    if matches!(
        cfg.compression.method,
        MethodConfig::Filter | MethodConfig::Lowrank
    ) && cfg.compression.targets.iter().any(|&t| t >= 1.0)
    {
        return bad("filter/lowrank targets must be below 1".into());
    }
    if matches!(cfg.model, ModelConfig::Mlp { .. })
        && matches!(cfg.compression.method, MethodConfig::Filter)
    {
        return bad("filter pruning needs a convolutional model".into());
    }
    Ok(())
}

/// Expands the grid block into one concrete config per cell. Without a grid
/// block the config itself is the single cell.
pub fn expand_grid(cfg: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let Some(grid) = &cfg.grid else {
        return Ok(vec![cfg.clone()]);
    };
    let opt1 = |xs: &[f64]| -> Vec<Option<f64>> {
        if xs.is_empty() {
            vec![None]
        } else {
            xs.iter().copied().map(Some).collect()
        }
    };
    let mut cells = Vec::new();
    for kf in opt1(&grid.k_fractions) {
        for w in opt1(&grid.ws) {
            for wd in opt1(&grid.weight_decays) {
                for gl in opt1(&grid.group_lambdas) {
                    let mut cell = cfg.clone();
                    cell.grid = None;
                    let mut id = cfg.run.config_id.clone();
                    if let Some(kf) = kf {
                        let region = cell.region.as_mut().ok_or_else(|| {
                            HarnessError::Config("k_fractions axis needs a region block".into())
                        })?;
                        region.k_fraction = Some(kf);
                        id.push_str(&format!("_kf{kf}"));
                    }
                    if let Some(w) = w {
                        let region = cell.region.as_mut().ok_or_else(|| {
                            HarnessError::Config("ws axis needs a region block".into())
                        })?;
                        region.w = Some(w);
                        region.tau = None;
                        id.push_str(&format!("_w{w}"));
                    }
                    if let Some(wd) = wd {
                        cell.optimizer.weight_decay = wd;
                        id.push_str(&format!("_wd{wd}"));
                    }
                    if let Some(gl) = gl {
                        cell.optimizer.group_lambda = gl;
                        id.push_str(&format!("_gl{gl}"));
                    }
                    cell.run.config_id = id;
                    validate(&cell)?;
                    cells.push(cell);
                }
            }
        }
    }
    Ok(cells)
}
