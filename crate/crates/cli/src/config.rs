//! Config resolution: a JSON object from `--config`, overlaid by whichever
//! flags were given on the command line. Flag names are the config keys with
//! dashes, so every key can come from either place.

use std::fs;
use std::path::{Path, PathBuf};

use prmcs::losses::LossWeights;
use prmcs::textproc::PerturbationKind;
use prmcs::trainer::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Merges `flags` over the config file and deserializes the result.
pub fn resolve<F: Serialize, C: DeserializeOwned + Serialize>(
    command: &str,
    config: Option<&Path>,
    flags: &F,
) -> Result<C, CliError> {
    let mut merged = match config {
        Some(path) => match serde_json::from_str::<Value>(&fs::read_to_string(path)?) {
            Ok(Value::Object(map)) => map,
            Ok(_) => {
                return Err(CliError::Config(format!(
                    "{}: expected a JSON object",
                    path.display()
                )))
            }
            Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display()))),
        },
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags)? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    let resolved: C = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(e.to_string()))?;
    eprintln!("{command}: {}", serde_json::to_string(&resolved)?);
    Ok(resolved)
}

pub fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("missing required setting `{key}`")))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub kinds: Vec<PerturbationKind>,
    pub p: f64,
    pub seed: u64,
    pub force_permutation: Option<Vec<usize>>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            kinds: PerturbationKind::ALL.to_vec(),
            p: 0.4,
            seed: 0,
            force_permutation: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub images: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub pairs: usize,
    pub vocab_words: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            images: None,
            records: None,
            teacher: None,
            pairs: 1000,
            vocab_words: 500,
            dim: 32,
            sigma: 0.1,
            seed: 0,
        }
    }
}

/// Shared by the three training subcommands. The shape keys apply only when
/// no `init` checkpoint is given.
#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub images: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub split_out: Option<PathBuf>,
    pub vocab: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub gate_gain: f64,
    pub init_seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub p: f64,
    pub kinds: Vec<PerturbationKind>,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let shape = prmcs::embedcore::EncoderShape::default();
        Self {
            images: None,
            teacher: None,
            captions: None,
            init: None,
            out: None,
            trace: None,
            split_out: None,
            vocab: shape.vocab,
            hidden: shape.hidden,
            out_dim: shape.out_dim,
            gate_gain: prmcs::embedcore::DEFAULT_GATE_GAIN,
            init_seed: 0,
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            steps: t.steps,
            seed: t.seed,
            p: t.p,
            kinds: t.kinds,
            l1: t.weights.l1,
            l2: t.weights.l2,
            l3: t.weights.l3,
        }
    }
}

impl TrainRunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            steps: self.steps,
            seed: self.seed,
            p: self.p,
            kinds: self.kinds.clone(),
            weights: LossWeights {
                l1: self.l1,
                l2: self.l2,
                l3: self.l3,
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub images: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub w: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            images: None,
            captions: None,
            model: None,
            out: None,
            w: prmcs::embedcore::MetricConfig::default().w,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropConfig {
    pub original: Option<PathBuf>,
    pub perturbed: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seeds: u64,
    pub batch_size: usize,
    pub h: f64,
    pub tolerance: f64,
    pub vocab: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub gate_gain: f64,
    pub out: Option<PathBuf>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        let shape = prmcs::embedcore::EncoderShape::default();
        Self {
            seeds: 5,
            batch_size: 8,
            h: 1e-5,
            tolerance: 1e-4,
            vocab: shape.vocab,
            hidden: shape.hidden,
            out_dim: shape.out_dim,
            gate_gain: prmcs::embedcore::DEFAULT_GATE_GAIN,
            out: None,
        }
    }
}
