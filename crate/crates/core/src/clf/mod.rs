//! Final AD-vs-healthy CNN classifier, its training regime and the scenario
//! evaluation harness.

use serde::{Deserialize, Serialize};

use crate::neural::NeuralError;

mod cnn;
mod report;
mod scenario;
mod train;

pub use cnn::{bce_with_logits, stack, Cnn, CnnArch};
pub use report::{emit_report, format_pct, AccuracyReport, ReportError, ReportMetadata, ReportRow};
pub use scenario::{
    evaluate_scenario, images_of, run_matrix, run_repetition, seeds, split_repetition, task_series,
    train_class_generators, EvalConfig, RepetitionData, Scenario, ScenarioError, DEFAULT_BUDGETS, STUDIED_TASKS, TEST_FRACTION,
};
pub use train::{accuracy, fit, train_classifier, ClfEpoch, ClfFit};

#[derive(Debug, thiserror::Error)]
pub enum ClfError {
    #[error("label error: {0}")]
    Label(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Classifier training setup. Defaults follow the reference configuration;
/// `patience` and `arch` are this implementation's choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClfConfig {
    pub arch: CnnArch,
    /// Share of the data used for training (ensemble members use it directly).
    pub train_fraction: f64,
    /// Share of the data used for early stopping.
    pub validation_fraction: f64,
    /// Number of repetitions averaged in the evaluation.
    pub n_folds: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub max_epochs: usize,
    /// Epochs without a new validation-loss minimum before training stops.
    pub patience: usize,
}

impl Default for ClfConfig {
    fn default() -> Self {
        Self {
            arch: CnnArch::default(),
            train_fraction: 0.35,
            validation_fraction: 0.15,
            n_folds: 5,
            batch_size: 5,
            learning_rate: 2e-5,
            momentum: 0.9,
            nesterov: true,
            max_epochs: 10_000,
            patience: 50,
        }
    }
}

impl ClfConfig {
    /// Validation images as a share of all non-test images (0.15 / 0.5 = 0.3 by default).
    pub fn validation_share(&self) -> f64 {
        self.validation_fraction / (self.train_fraction + self.validation_fraction)
    }

    pub fn validate(&self) -> Result<(), ClfError> {
        self.arch.validate()?;
        let frac_ok = self.train_fraction > 0.0
            && self.validation_fraction >= 0.0
            && self.train_fraction + self.validation_fraction <= 1.0;
        if !frac_ok {
            return Err(ClfError::Config(format!(
                "fractions {}/{} must be positive and sum to at most 1",
                self.train_fraction, self.validation_fraction
            )));
        }
        if self.batch_size == 0 || self.n_folds == 0 || self.max_epochs == 0 {
            return Err(ClfError::Config("batch_size, n_folds and max_epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(ClfError::Config(format!(
                "learning rate {} / momentum {} out of range",
                self.learning_rate, self.momentum
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ClfConfig::default();
        assert_eq!((c.train_fraction, c.validation_fraction), (0.35, 0.15));
        assert_eq!((c.n_folds, c.batch_size, c.max_epochs), (5, 5, 10_000));
        assert_eq!((c.learning_rate, c.momentum, c.nesterov), (2e-5, 0.9, true));
        assert!((c.validation_share() - 0.3).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn bad_values_rejected() {
        for bad in [
            ClfConfig { batch_size: 0, ..ClfConfig::default() },
            ClfConfig { train_fraction: 0.9, validation_fraction: 0.2, ..ClfConfig::default() },
            ClfConfig { momentum: 1.0, ..ClfConfig::default() },
            ClfConfig { arch: CnnArch { pool_after: vec![7], ..CnnArch::default() }, ..ClfConfig::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
