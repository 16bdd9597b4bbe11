//! JSON experiment configuration: strict parsing (unknown keys rejected),
//! defaults applied at parse time so the persisted resolved config is
//! self-describing.

use albench_core::adversarial::{BimConfig, StepNorm};
use albench_core::error::AlError;
use albench_core::experiment::{StrategyConfig, StrategyKind};
use albench_core::learner::{parse_optimizer, LearnerConfig};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fs;
use std::path::Path;

/// One experiment: a dataset, a learner, a strategy, and loop counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Identifier used for output paths and the AUBC table row; defaults
    /// to the strategy kind.
    #[serde(default)]
    pub name: String,
    pub dataset: DatasetConfig,
    pub learner: LearnerFile,
    pub strategy: StrategyFile,
    pub m_init: usize,
    pub b: usize,
    pub q: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default = "default_true")]
    pub include_round0: bool,
}

fn default_trials() -> usize {
    3
}

fn default_output_dir() -> String {
    "albench_out".into()
}

fn default_true() -> bool {
    true
}

/// Learner hyperparameters as written in config files. Hidden widths only:
/// the input width and class count come from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerFile {
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_batch")]
    pub batch_size_train: usize,
    #[serde(default)]
    pub weight_init_seed: u64,
    #[serde(default)]
    pub loss_head: bool,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_xi")]
    pub ranking_xi: f64,
}

fn default_epochs() -> usize {
    30
}

fn default_lr() -> f64 {
    0.01
}

fn default_optimizer() -> String {
    "adam".into()
}

fn default_batch() -> usize {
    32
}

fn default_xi() -> f64 {
    1.0
}

impl LearnerFile {
    /// Assemble the full layer list for a dataset with `input_dim`
    /// features and `k` classes.
    pub fn to_core(&self, input_dim: usize, k: usize) -> Result<LearnerConfig, AlError> {
        let mut layer_sizes = Vec::with_capacity(self.hidden_layers.len() + 2);
        layer_sizes.push(input_dim);
        layer_sizes.extend_from_slice(&self.hidden_layers);
        layer_sizes.push(k);
        let cfg = LearnerConfig {
            layer_sizes,
            dropout_rate: self.dropout_rate,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: parse_optimizer(&self.optimizer)?,
            batch_size_train: self.batch_size_train,
            weight_init_seed: self.weight_init_seed,
            loss_head: self.loss_head,
            standardize: self.standardize,
            ranking_xi: self.ranking_xi,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Strategy block as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub kind: String,
    #[serde(default = "default_t")]
    pub t_passes: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_pca_dim")]
    pub pca_dim: usize,
    #[serde(default = "default_bim_epsilon")]
    pub bim_epsilon: f64,
    #[serde(default = "default_bim_max_steps")]
    pub bim_max_steps: usize,
    #[serde(default = "default_bim_norm")]
    pub bim_norm: String,
    #[serde(default)]
    pub target_clusters: Option<usize>,
}

fn default_t() -> usize {
    10
}

fn default_delta() -> f64 {
    1e-5
}

fn default_rho() -> f64 {
    10.0
}

fn default_beta() -> f64 {
    1.0
}

fn default_pca_dim() -> usize {
    32
}

fn default_bim_epsilon() -> f64 {
    0.05
}

fn default_bim_max_steps() -> usize {
    50
}

fn default_bim_norm() -> String {
    "linf".into()
}

impl StrategyFile {
    pub fn to_core(&self) -> Result<StrategyConfig, AlError> {
        let norm = match self.bim_norm.as_str() {
            "linf" => StepNorm::LInf,
            "l2" => StepNorm::L2,
            other => {
                return Err(AlError::Config(format!(
                    "bim_norm must be `linf` or `l2`, got `{other}`"
                )))
            }
        };
        let cfg = StrategyConfig {
            kind: StrategyKind::parse(&self.kind)?,
            t_passes: self.t_passes,
            delta: self.delta,
            rho: self.rho,
            beta: self.beta,
            pca_dim: self.pca_dim,
            bim: BimConfig {
                epsilon_step: self.bim_epsilon,
                max_steps: self.bim_max_steps,
                norm,
            },
            target_clusters: self.target_clusters,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Dataset source. Serialized with a `kind` discriminator; unknown keys
/// inside each kind are rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetConfig {
    SynthGaussians(GaussiansSpec),
    SynthXor(XorSpec),
    SynthRings(RingsSpec),
    Idx(IdxSpec),
    Csv(CsvSpec),
}

impl DatasetConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DatasetConfig::SynthGaussians(_) => "synth_gaussians",
            DatasetConfig::SynthXor(_) => "synth_xor",
            DatasetConfig::SynthRings(_) => "synth_rings",
            DatasetConfig::Idx(_) => "idx",
            DatasetConfig::Csv(_) => "csv",
        }
    }

    /// Display name used in tables; defaults to the kind.
    pub fn name(&self) -> String {
        let explicit = match self {
            DatasetConfig::SynthGaussians(s) => &s.name,
            DatasetConfig::SynthXor(s) => &s.name,
            DatasetConfig::SynthRings(s) => &s.name,
            DatasetConfig::Idx(s) => &s.name,
            DatasetConfig::Csv(s) => &s.name,
        };
        if explicit.is_empty() {
            self.kind_name().to_string()
        } else {
            explicit.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussiansSpec {
    #[serde(default)]
    pub name: String,
    pub n_per_class: usize,
    pub means: Vec<Vec<f64>>,
    #[serde(default = "default_std")]
    pub std: f64,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Optional per-class keep ratios applied before the split.
    #[serde(default)]
    pub imbalance_ratios: Option<Vec<f64>>,
    #[serde(default)]
    pub imbalance_seed: u64,
}

fn default_std() -> f64 {
    1.0
}

fn default_test_fraction() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XorSpec {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub noise: f64,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingsSpec {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub radii: Vec<f64>,
    pub noise: f64,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSpec {
    #[serde(default)]
    pub name: String,
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    /// Optional seeded subsample sizes.
    #[serde(default)]
    pub train_subset: Option<usize>,
    #[serde(default)]
    pub test_subset: Option<usize>,
    #[serde(default)]
    pub subset_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSpec {
    #[serde(default)]
    pub name: String,
    pub path: String,
    pub label_column: String,
    #[serde(default)]
    pub group_column: Option<String>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl Serialize for DatasetConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        fn tagged<S: Serializer, T: Serialize>(
            s: S,
            kind: &str,
            spec: &T,
        ) -> Result<S::Ok, S::Error> {
            let mut v = serde_json::to_value(spec).map_err(serde::ser::Error::custom)?;
            v.as_object_mut()
                .expect("spec structs serialize to objects")
                .insert("kind".into(), serde_json::Value::String(kind.into()));
            v.serialize(s)
        }
        match self {
            DatasetConfig::SynthGaussians(x) => tagged(serializer, "synth_gaussians", x),
            DatasetConfig::SynthXor(x) => tagged(serializer, "synth_xor", x),
            DatasetConfig::SynthRings(x) => tagged(serializer, "synth_rings", x),
            DatasetConfig::Idx(x) => tagged(serializer, "idx", x),
            DatasetConfig::Csv(x) => tagged(serializer, "csv", x),
        }
    }
}

impl<'de> Deserialize<'de> for DatasetConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mut v = serde_json::Value::deserialize(deserializer)?;
        let obj = v
            .as_object_mut()
            .ok_or_else(|| D::Error::custom("dataset: expected an object"))?;
        let kind = match obj.remove("kind") {
            Some(serde_json::Value::String(s)) => s,
            Some(_) => return Err(D::Error::custom("dataset.kind: expected a string")),
            None => return Err(D::Error::custom("dataset: missing field `kind`")),
        };
        fn spec<'de, D: Deserializer<'de>, T: serde::de::DeserializeOwned>(
            v: serde_json::Value,
        ) -> Result<T, D::Error> {
            serde_json::from_value(v).map_err(|e| D::Error::custom(format!("dataset: {e}")))
        }
        match kind.as_str() {
            "synth_gaussians" => Ok(DatasetConfig::SynthGaussians(spec::<D, _>(v)?)),
            "synth_xor" => Ok(DatasetConfig::SynthXor(spec::<D, _>(v)?)),
            "synth_rings" => Ok(DatasetConfig::SynthRings(spec::<D, _>(v)?)),
            "idx" => Ok(DatasetConfig::Idx(spec::<D, _>(v)?)),
            "csv" => Ok(DatasetConfig::Csv(spec::<D, _>(v)?)),
            other => Err(D::Error::custom(format!(
                "dataset.kind: unknown dataset kind `{other}`"
            ))),
        }
    }
}

/// A config file: either a single experiment object or an array of them.
pub fn parse_configs(path: &Path) -> Result<Vec<ExperimentConfig>, AlError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AlError::Format(format!("{}: {e}", path.display())))?;
    parse_configs_str(&text).map_err(|e| AlError::Format(format!("{}: {e}", path.display())))
}

/// Parse one config document (object or array) from JSON text.
pub fn parse_configs_str(text: &str) -> Result<Vec<ExperimentConfig>, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let raw: Vec<serde_json::Value> = match value {
        serde_json::Value::Array(items) => items,
        obj @ serde_json::Value::Object(_) => vec![obj],
        _ => return Err("expected a config object or an array of them".into()),
    };
    if raw.is_empty() {
        return Err("empty suite: no configs".into());
    }
    let mut configs = Vec::with_capacity(raw.len());
    for (i, item) in raw.into_iter().enumerate() {
        let de = serde_json::Value::deserialize(item).expect("value");
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| format!("config[{i}] at `{}`: {}", e.path(), e.inner()))?;
        if cfg.name.is_empty() {
            cfg.name = cfg.strategy.kind.clone();
        }
        validate_counts(&cfg).map_err(|e| format!("config[{i}] ({}): {e}", cfg.name))?;
        configs.push(cfg);
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != configs.len() {
        return Err("duplicate config names in suite; set distinct `name` fields".into());
    }
    Ok(configs)
}

fn validate_counts(cfg: &ExperimentConfig) -> Result<(), String> {
    if cfg.m_init == 0 {
        return Err("m_init must be positive".into());
    }
    if cfg.b == 0 {
        return Err("b must be positive".into());
    }
    if cfg.trials == 0 {
        return Err("trials must be positive".into());
    }
    // Early surface errors for learner/strategy blocks (dims resolved later).
    cfg.strategy.to_core().map_err(|e| e.to_string())?;
    if cfg.learner.hidden_layers.contains(&0) {
        return Err("hidden layer widths must be positive".into());
    }
    Ok(())
}

/// Serialize the resolved config (defaults included) as pretty JSON.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}
