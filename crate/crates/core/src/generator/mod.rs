//! Per-class MDN-LSTM generator over `(a_x, a_y)` acceleration sequences.

use serde::{Deserialize, Serialize};

use crate::ink::{AccelSeries, Class};
use crate::neural::NeuralError;

pub mod mdn;
mod model;
mod sample;
mod train;

pub use mdn::{mdn_nll, mdn_params, MixtureParams};
pub use model::{GeneratorModel, LstmState};
pub use sample::sample_sequence;
pub use train::{train_generator, training_windows, EpochLoss, GeneratorFit};

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Generator hyperparameters. Defaults reproduce the reference setup; the
/// optimizer fields below `train_fraction` are this implementation's choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub hidden_size: usize,
    pub n_layers: usize,
    /// Length of every sampled sequence and of every training window.
    pub seq_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub n_mixtures: usize,
    pub dropout_keep: f64,
    pub train_fraction: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub nesterov: bool,
    /// Global gradient-norm ceiling applied before every update.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hidden_size: 256,
            n_layers: 2,
            seq_len: 150,
            epochs: 301,
            learning_rate: 0.01,
            n_mixtures: 20,
            dropout_keep: 0.8,
            train_fraction: 0.7,
            batch_size: 8,
            momentum: 0.0,
            nesterov: false,
            clip_norm: 10.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let positive = [
            ("hidden_size", self.hidden_size),
            ("n_layers", self.n_layers),
            ("seq_len", self.seq_len),
            ("epochs", self.epochs),
            ("n_mixtures", self.n_mixtures),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(GeneratorError::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(GeneratorError::Config("learning_rate and clip_norm must be positive".into()));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(GeneratorError::Config(format!("dropout_keep {} not in (0, 1]", self.dropout_keep)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(GeneratorError::Config(format!("train_fraction {} not in (0, 1)", self.train_fraction)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GeneratorError::Config(format!("momentum {} not in [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// Anything that can emit labelled synthetic series on demand.
pub trait SequenceSource: Sync {
    fn label(&self) -> Class;
    fn sample(&self, seed: u64) -> AccelSeries;
}

impl SequenceSource for GeneratorModel {
    fn label(&self) -> Class {
        self.label
    }

    fn sample(&self, seed: u64) -> AccelSeries {
        sample_sequence(self, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_table() {
        let c = GeneratorConfig::default();
        assert_eq!((c.hidden_size, c.n_layers, c.seq_len, c.epochs, c.n_mixtures), (256, 2, 150, 301, 20));
        assert_eq!((c.learning_rate, c.dropout_keep, c.train_fraction), (0.01, 0.8, 0.7));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let bad = GeneratorConfig { dropout_keep: 0.0, ..GeneratorConfig::default() };
        assert!(bad.validate().is_err());
        let bad = GeneratorConfig { hidden_size: 0, ..GeneratorConfig::default() };
        assert!(bad.validate().is_err());
    }
}
