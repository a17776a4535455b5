use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AttackConfig;
use crate::error::{Error, Result};
use crate::fed::FederationConfig;
use crate::graph::PartitionStrategy;
use crate::io::SynthSpec;
use crate::metrics::ThresholdObjective;
use crate::nn::ModelDims;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// One-hot node identity.
    #[default]
    NodeIndex,
    /// `[1, ln(1 + degree)]`.
    Degree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `src,dst,timestamp,label` with a header.
    #[default]
    Edges,
    /// Headerless LANL authentication rows; only NTLM events are kept.
    LanlAuth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Input file; relative paths resolve against the config file.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub format: DataFormat,
    /// LANL red-team file labelling malicious events (`lanl_auth` only).
    #[serde(default)]
    pub redteam: Option<PathBuf>,
    /// Generate the dataset in memory instead.
    #[serde(default)]
    pub synth: Option<SynthSpec>,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default)]
    pub features: FeatureKind,
}

fn default_window() -> u64 {
    3600
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Fraction of windows used for training, counted from the start.
    pub train: f64,
    /// Fraction of windows used for validation, right after training.
    pub validation: f64,
    /// Drop label-1 events from the training windows.
    pub clean_training: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.15,
            clean_training: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_h: usize,
    pub d_z: usize,
    /// 0 scores window `t` from `Z_t`, 1 from `Z_{t-1}`.
    pub offset: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_h: 64,
            d_z: 32,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub strategy: PartitionStrategy,
    /// Keep cross-client edges (one-hop augmentation).
    pub augment: bool,
    /// Use a `node_id,client_id` file instead of partitioning.
    pub file: Option<PathBuf>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            strategy: PartitionStrategy::Community,
            augment: true,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub objective: ThresholdObjective,
    /// Sampled non-edges per validation edge, used as the positive class when
    /// learning the threshold.
    pub validation_negative_ratio: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            objective: ThresholdObjective::F1,
            validation_negative_ratio: 1.0,
        }
    }
}

/// Optional fixed seeds per randomness source; unset ones derive from the run seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedOverrides {
    pub data: Option<u64>,
    pub partition: Option<u64>,
    pub init: Option<u64>,
    pub sampling: Option<u64>,
    pub federation: Option<u64>,
    pub attack: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub federation: FederationConfig,
    #[serde(default)]
    pub attack: Option<AttackConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub seeds: SeedOverrides,
    /// Run directory; relative paths resolve against the config file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

impl ExperimentConfig {
    /// A config around an in-memory synthetic dataset.
    pub fn synthetic(spec: SynthSpec) -> Self {
        Self {
            seed: 0,
            precision: Precision::default(),
            data: DataConfig {
                csv: None,
                format: DataFormat::default(),
                redteam: None,
                window: spec.window,
                synth: Some(spec),
                features: FeatureKind::default(),
            },
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            partition: PartitionConfig::default(),
            federation: FederationConfig::default(),
            attack: None,
            eval: EvalConfig::default(),
            seeds: SeedOverrides::default(),
            output: default_output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => std::path::absolute(p)?,
            _ => std::env::current_dir()?,
        };
        cfg.resolve_paths(&base);
        cfg.validate_files()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.redteam.as_mut() {
            fix(p);
        }
        if let Some(p) = self.partition.file.as_mut() {
            fix(p);
        }
        fix(&mut self.output);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match (&self.data.csv, &self.data.synth) {
            (Some(_), Some(_)) => return bad("set only one of data.csv and data.synth".into()),
            (None, None) => return bad("set data.csv or data.synth".into()),
            (None, Some(spec)) => spec.validate()?,
            _ => {}
        }
        if self.data.redteam.is_some() && self.data.format != DataFormat::LanlAuth {
            return bad("data.redteam needs format = \"lanl_auth\"".into());
        }
        if self.data.window == 0 {
            return bad("data.window must be >= 1".into());
        }
        let s = self.split;
        if !(s.train > 0.0 && s.validation > 0.0 && s.train + s.validation < 1.0) {
            return bad(format!(
                "split fractions must be positive and leave room for testing, got {} / {}",
                s.train, s.validation
            ));
        }
        ModelDims::new(1, self.model.d_h, self.model.d_z)?;
        if self.model.offset > 1 {
            return bad(format!("model.offset must be 0 or 1, got {}", self.model.offset));
        }
        self.federation.validate()?;
        if let Some(a) = &self.attack {
            a.validate(self.federation.clients)?;
        }
        if !(self.eval.validation_negative_ratio > 0.0) {
            return bad("eval.validation_negative_ratio must be > 0".into());
        }
        if let ThresholdObjective::FprTarget(x) = self.eval.objective {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("fpr target {x} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn validate_files(&self) -> Result<()> {
        let files = [&self.data.csv, &self.data.redteam, &self.partition.file];
        for p in files.into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn seed_for(&self, ns: &'static str) -> u64 {
        let o = self.seeds;
        let fixed = match ns {
            "data" => o.data,
            "partition" => o.partition,
            "init" => o.init,
            "sampling" => o.sampling,
            "federation" => o.federation,
            "attack" => o.attack,
            _ => None,
        };
        fixed.unwrap_or_else(|| seed::derive(self.seed, ns, 0))
    }

    /// Federation settings with the namespaced seed applied.
    pub fn federation(&self) -> FederationConfig {
        FederationConfig {
            seed: self.seed_for("federation"),
            ..self.federation.clone()
        }
    }
}
