//! Run configuration: defaults, a line-oriented `section.key = value` file and
//! dotted command-line overrides, applied in that order.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use synthwrite::clf::{ClfConfig, EvalConfig, DEFAULT_BUDGETS, STUDIED_TASKS};
use synthwrite::generator::GeneratorConfig;
use synthwrite::MovementMode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("line {line}: expected `section.key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("`{0}` is required for this command")]
    Missing(&'static str),
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    /// Directory in the canonical corpus layout; read only by `ingest`.
    pub corpus_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub tasks: Vec<u8>,
    pub modes: Vec<MovementMode>,
    pub budgets: Vec<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub generator: GeneratorConfig,
    pub clf: ClfConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_root: None,
            output_dir: PathBuf::from("synthwrite-out"),
            tasks: STUDIED_TASKS.to_vec(),
            modes: MovementMode::ALL.to_vec(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            seed: 0,
            threads: None,
            generator: GeneratorConfig::default(),
            clf: ClfConfig::default(),
        }
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(ConfigError::Value { key: key.into(), value: value.into(), reason: "empty list".into() });
    }
    items.into_iter().map(|v| scalar(key, v)).collect()
}

impl RunConfig {
    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let g = &mut self.generator;
        let c = &mut self.clf;
        match key {
            "run.corpus_root" => self.corpus_root = Some(PathBuf::from(value.trim())),
            "run.output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "run.tasks" => self.tasks = list(key, value)?,
            "run.modes" => self.modes = list(key, value)?,
            "run.budgets" => self.budgets = list(key, value)?,
            "run.seed" => self.seed = scalar(key, value)?,
            "run.threads" => self.threads = Some(scalar(key, value)?),
            "generator.hidden_size" => g.hidden_size = scalar(key, value)?,
            "generator.n_layers" => g.n_layers = scalar(key, value)?,
            "generator.seq_len" => g.seq_len = scalar(key, value)?,
            "generator.epochs" => g.epochs = scalar(key, value)?,
            "generator.learning_rate" => g.learning_rate = scalar(key, value)?,
            "generator.n_mixtures" => g.n_mixtures = scalar(key, value)?,
            "generator.dropout_keep" => g.dropout_keep = scalar(key, value)?,
            "generator.train_fraction" => g.train_fraction = scalar(key, value)?,
            "generator.batch_size" => g.batch_size = scalar(key, value)?,
            "generator.momentum" => g.momentum = scalar(key, value)?,
            "generator.nesterov" => g.nesterov = scalar(key, value)?,
            "generator.clip_norm" => g.clip_norm = scalar(key, value)?,
            "clf.conv_channels" => c.arch.conv_channels = list(key, value)?,
            "clf.pool_after" => c.arch.pool_after = list(key, value)?,
            "clf.dense_units" => c.arch.dense_units = scalar(key, value)?,
            "clf.train_fraction" => c.train_fraction = scalar(key, value)?,
            "clf.validation_fraction" => c.validation_fraction = scalar(key, value)?,
            "clf.n_folds" => c.n_folds = scalar(key, value)?,
            "clf.batch_size" => c.batch_size = scalar(key, value)?,
            "clf.learning_rate" => c.learning_rate = scalar(key, value)?,
            "clf.momentum" => c.momentum = scalar(key, value)?,
            "clf.nesterov" => c.nesterov = scalar(key, value)?,
            "clf.max_epochs" => c.max_epochs = scalar(key, value)?,
            "clf.patience" => c.patience = scalar(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every assignment of a config file. Blank lines and text after `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            let key = key.trim();
            if !key.contains('.') {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Defaults, then `file_text`, then `overrides` in order.
    pub fn resolve(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(text) = file_text {
            cfg.apply_text(text)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = path
            .map(|p| std::fs::read_to_string(p).map_err(|e| ConfigError::Io { path: p.to_path_buf(), source: e }))
            .transpose()?;
        Self::resolve(text.as_deref(), overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, reason: String| ConfigError::Value { key: key.into(), value: String::new(), reason };
        self.generator.validate().map_err(|e| invalid("generator", e.to_string()))?;
        self.clf.validate().map_err(|e| invalid("clf", e.to_string()))?;
        if self.tasks.is_empty() || self.modes.is_empty() || self.budgets.is_empty() {
            return Err(invalid("run", "tasks, modes and budgets must be non-empty".into()));
        }
        Ok(())
    }

    pub fn corpus_root(&self) -> Result<&Path, ConfigError> {
        self.corpus_root.as_deref().ok_or(ConfigError::Missing("run.corpus_root"))
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig { generator: self.generator.clone(), clf: self.clf.clone() }
    }

    /// SHA-256 of the settings that influence results (paths and thread count excluded).
    pub fn hash(&self) -> String {
        let key = serde_json::json!({
            "tasks": self.tasks,
            "modes": self.modes,
            "budgets": self.budgets,
            "seed": self.seed,
            "generator": self.generator,
            "clf": self.clf,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A `section.key` and its raw value.
pub type Override = (String, String);

/// Splits `--section.key value` and `--section.key=value` pairs out of `args`,
/// returning the remaining arguments and the overrides in order.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), ConfigError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let dotted = arg.strip_prefix("--").filter(|k| k.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(kv) => match kv.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let key = kv.to_string();
                    let value = it.next().ok_or_else(|| ConfigError::Value {
                        key: key.clone(),
                        value: String::new(),
                        reason: "missing value".into(),
                    })?;
                    overrides.push((key, value));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}
