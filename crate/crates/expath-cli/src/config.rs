//! Run configuration with layered overrides: built-in defaults, then the
//! --config file, then environment (EXPATH_DATA), then explicit flags.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use expath_core::kge::{ModelConfig, ModelFamily};
use expath_core::rules::{MinerConfig, Thresholds};
use expath_core::scorer::PositionPolicy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub model: Option<ModelConfig>,
    pub thresholds: Option<Thresholds>,
    pub policy: Option<String>,
    pub k: Option<usize>,
    pub targets: Option<usize>,
    pub mimic_epochs: Option<usize>,
    pub rel_eps: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&PathBuf>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }
}

/// Model hyperparameter flags shared by train/explain/attack.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Model family: transe, complex, or distmult
    #[arg(long = "model")]
    pub family: Option<String>,
    /// Embedding dimension
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Negative samples per positive
    #[arg(long)]
    pub neg: Option<usize>,
    /// Mini-batch size
    #[arg(long)]
    pub batch: Option<usize>,
    /// L2 regularization weight
    #[arg(long)]
    pub reg: Option<f64>,
    /// Ranking margin (translational family)
    #[arg(long)]
    pub margin: Option<f64>,
    /// Path to a ModelConfig JSON, applied before the individual flags
    #[arg(long = "model-cfg")]
    pub model_cfg: Option<PathBuf>,
}

impl ModelFlags {
    pub fn resolve(&self, file: &FileConfig, seed: Option<u64>) -> anyhow::Result<ModelConfig> {
        let mut config = file.model.clone().unwrap_or_default();
        if let Some(path) = &self.model_cfg {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        }
        if let Some(name) = &self.family {
            config.family = name.parse::<ModelFamily>()?;
        }
        if let Some(v) = self.dim {
            config.dimension = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.lr {
            config.learning_rate = v;
        }
        if let Some(v) = self.neg {
            config.negatives = v;
        }
        if let Some(v) = self.batch {
            config.batch_size = v;
        }
        if let Some(v) = self.reg {
            config.regularization = v;
        }
        if let Some(v) = self.margin {
            config.margin = v;
        }
        if let Some(v) = seed.or(file.seed) {
            config.seed = v;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Mining/selection flags shared by explain/attack.
#[derive(Debug, Clone, Args)]
pub struct MinerFlags {
    /// Minimum standard confidence for a retained rule
    #[arg(long)]
    pub min_sc: Option<f64>,
    /// Minimum head coverage for a retained rule
    #[arg(long)]
    pub min_hc: Option<f64>,
    /// Support smoothing constant
    #[arg(long)]
    pub min_supp: Option<usize>,
    /// Maximum body/path length (1..=3)
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Grounded-path cap per prediction
    #[arg(long)]
    pub cap: Option<usize>,
    /// Epochs for mimic post-training
    #[arg(long)]
    pub mimic_epochs: Option<usize>,
    /// Relevance pruning epsilon
    #[arg(long)]
    pub rel_eps: Option<f64>,
    /// Exclude both orientations of the boundary relation in mimics
    #[arg(long)]
    pub exclude_both: bool,
}

impl MinerFlags {
    pub fn resolve(&self, file: &FileConfig) -> MinerConfig {
        let mut config = MinerConfig::default();
        if let Some(t) = file.thresholds {
            config.thresholds = t;
        }
        if let Some(v) = file.mimic_epochs {
            config.mimic_epochs = v;
        }
        if let Some(v) = file.rel_eps {
            config.rel_eps = v;
        }
        if let Some(v) = self.min_sc {
            config.thresholds.min_sc = v;
        }
        if let Some(v) = self.min_hc {
            config.thresholds.min_hc = v;
        }
        if let Some(v) = self.min_supp {
            config.thresholds.min_supp = v;
        }
        if let Some(v) = self.max_len {
            config.max_path_len = v;
        }
        if let Some(v) = self.cap {
            config.path_cap = v;
        }
        if let Some(v) = self.mimic_epochs {
            config.mimic_epochs = v;
        }
        if let Some(v) = self.rel_eps {
            config.rel_eps = v;
        }
        config.exclude_both_orientations |= self.exclude_both;
        config
    }
}

/// Data root resolution: flag, then EXPATH_DATA, then the config file.
pub fn resolve_data(flag: Option<&PathBuf>, file: &FileConfig) -> anyhow::Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    if let Ok(env) = std::env::var("EXPATH_DATA") {
        if !env.is_empty() {
            return Ok(PathBuf::from(env));
        }
    }
    if let Some(p) = &file.data {
        return Ok(p.clone());
    }
    bail!("no dataset directory: pass --data, set EXPATH_DATA, or put \"data\" in the config file");
}

pub fn resolve_policy(flag: Option<&str>, file: &FileConfig) -> anyhow::Result<Option<PositionPolicy>> {
    let name = flag.map(str::to_string).or_else(|| file.policy.clone());
    match name.as_deref() {
        None | Some("auto") => Ok(None),
        Some("all") => Ok(Some(PositionPolicy::All)),
        Some("head") => Ok(Some(PositionPolicy::Head)),
        Some("tail") => Ok(Some(PositionPolicy::Tail)),
        Some(other) => bail!("unknown policy {other:?} (expected auto|all|head|tail)"),
    }
}
