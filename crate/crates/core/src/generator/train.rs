use rand::seq::SliceRandom;

use super::{GeneratorConfig, GeneratorError, GeneratorModel};
use crate::ink::AccelSeries;
use crate::neural::rng::component_rng;
use crate::neural::{clip_grad_norm, sgd_step, OptimState, Tape};

/// Mean losses recorded after one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch (dropout active).
    pub train: f64,
    /// Dropout-free loss on the validation windows, if there are any.
    pub validation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GeneratorFit {
    /// Weights after the final epoch.
    pub model: GeneratorModel,
    pub history: Vec<EpochLoss>,
}

/// Cuts each series into non-overlapping `seq_len` windows; the short tail and
/// series shorter than `seq_len` are dropped.
pub fn training_windows(series: &[&AccelSeries], seq_len: usize) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for s in series {
        for start in (0..s.len()).step_by(seq_len.max(1)) {
            if start + seq_len <= s.len() {
                out.push((start..start + seq_len).map(|i| s.point(i)).collect());
            }
        }
    }
    out
}

fn mean_loss(model: &GeneratorModel, windows: &[Vec<(f64, f64)>], batch: usize) -> Result<f64, GeneratorError> {
    let mut total = 0.0;
    for chunk in windows.chunks(batch) {
        let refs: Vec<&[(f64, f64)]> = chunk.iter().map(Vec::as_slice).collect();
        total += model.evaluate_loss(&refs)? * chunk.len() as f64;
    }
    Ok(total / windows.len() as f64)
}

/// Trains a generator on the series of a single class by teacher-forced NLL
/// minimization. Gradient steps use the NLL summed over each window and averaged
/// over the minibatch. Series are split 70/30 (per `train_fraction`) into training and
/// validation sets before windowing.
pub fn train_generator(series: &[AccelSeries], cfg: &GeneratorConfig) -> Result<GeneratorFit, GeneratorError> {
    cfg.validate()?;
    let first = series.first().ok_or_else(|| GeneratorError::InsufficientData("no series".into()))?;
    if let Some(other) = series.iter().find(|s| s.label != first.label) {
        return Err(GeneratorError::Label(format!(
            "series of classes {} and {} in one generator",
            first.label, other.label
        )));
    }
    if series.len() < 2 {
        return Err(GeneratorError::InsufficientData(format!("{} series; need at least 2", series.len())));
    }

    let mut order: Vec<&AccelSeries> = series.iter().collect();
    order.shuffle(&mut component_rng(cfg.seed, "split"));
    let n_train = ((cfg.train_fraction * series.len() as f64).round() as usize).clamp(1, series.len() - 1);
    let train = training_windows(&order[..n_train], cfg.seq_len);
    let validation = training_windows(&order[n_train..], cfg.seq_len);
    if train.is_empty() {
        return Err(GeneratorError::InsufficientData(format!(
            "no training series reaches {} points",
            cfg.seq_len
        )));
    }

    let mut model = GeneratorModel::init(cfg.clone(), first.label, first.source.task_id)?;
    let mut optim = OptimState::new(cfg.learning_rate, cfg.momentum, cfg.nesterov, model.params.tensors())?;
    let mut shuffle_rng = component_rng(cfg.seed, "shuffle");
    let mut dropout_rng = component_rng(cfg.seed, "dropout");
    let mut index: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        index.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for chunk in index.chunks(cfg.batch_size) {
            let batch: Vec<&[(f64, f64)]> = chunk.iter().map(|&i| train[i].as_slice()).collect();
            let mut tape = Tape::new();
            let vars = model.params.attach(&mut tape);
            let loss = model.teacher_forced_loss(&mut tape, &vars, &batch, Some(&mut dropout_rng))?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(GeneratorError::Diverged { epoch, loss: value });
            }
            sum += value * batch.len() as f64;
            let mut grads_by_var = tape.backward(loss)?;
            let mut grads: Vec<_> = vars
                .iter()
                .zip(model.params.tensors())
                .map(|(v, p)| grads_by_var.take_or_zeros(*v, p.shape()))
                .collect();
            // The reported loss is a per-step mean; updates follow the per-sequence
            // sum, i.e. the mean gradient times the window length.
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v *= cfg.seq_len as f64);
            }
            clip_grad_norm(&mut grads, cfg.clip_norm);
            sgd_step(model.params.tensors_mut(), &grads, &mut optim)?;
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = if validation.is_empty() { None } else { Some(mean_loss(&model, &validation, cfg.batch_size)?) };
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(GeneratorError::Diverged { epoch, loss: val_loss.unwrap_or(train_loss) });
        }
        history.push(EpochLoss { epoch, train: train_loss, validation: val_loss });
    }
    Ok(GeneratorFit { model, history })
}
