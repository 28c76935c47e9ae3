use rand::seq::SliceRandom;

use super::{ClfConfig, ClfError, Cnn};
use crate::imaging::GrayImage;
use crate::ink::Class;
use crate::neural::rng::component_rng;
use crate::neural::{sgd_step, OptimState, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClfEpoch {
    pub epoch: usize,
    /// Mean minibatch loss during the epoch.
    pub train_loss: f64,
    /// Loss on the validation images after the epoch (training loss when there are none).
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct ClfFit {
    /// Weights from `best_epoch`.
    pub model: Cnn,
    pub best_epoch: usize,
    pub history: Vec<ClfEpoch>,
}

fn require_both_classes(images: &[&GrayImage]) -> Result<(), ClfError> {
    for class in Class::ALL {
        if !images.iter().any(|im| im.label == class) {
            return Err(ClfError::Label(format!("training data has no {class} images")));
        }
    }
    Ok(())
}

/// Mini-batch SGD on mean binary cross entropy with early stopping on validation
/// loss. Training stops after `cfg.max_epochs` or once `cfg.patience` epochs pass
/// without a strictly lower validation loss; the weights of the best epoch are
/// returned.
pub fn fit(train: &[&GrayImage], val: &[&GrayImage], cfg: &ClfConfig, seed: u64) -> Result<ClfFit, ClfError> {
    cfg.validate()?;
    require_both_classes(train)?;
    let mut model = Cnn::init(cfg.arch.clone(), seed)?;
    let mut optim = OptimState::new(cfg.learning_rate, cfg.momentum, cfg.nesterov, model.params.tensors())?;
    let mut rng = component_rng(seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Cnn)> = None;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&GrayImage> = chunk.iter().map(|&i| train[i]).collect();
            let mut tape = Tape::new();
            let vars = model.params.attach(&mut tape);
            let loss = model.loss_on_tape(&mut tape, &vars, &batch)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(ClfError::Diverged { epoch, loss: value });
            }
            sum += value * batch.len() as f64;
            let mut grads_by_var = tape.backward(loss)?;
            let grads: Vec<Tensor> =
                vars.iter().zip(model.params.tensors()).map(|(v, p)| grads_by_var.take_or_zeros(*v, p.shape())).collect();
            sgd_step(model.params.tensors_mut(), &grads, &mut optim)?;
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = if val.is_empty() { train_loss } else { model.mean_loss(val)? };
        if !val_loss.is_finite() {
            return Err(ClfError::Diverged { epoch, loss: val_loss });
        }
        history.push(ClfEpoch { epoch, train_loss, val_loss });
        match &best {
            Some((_, b, _)) if val_loss >= *b => {}
            _ => best = Some((epoch, val_loss, model.clone())),
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let (best_epoch, _, model) = best.ok_or_else(|| ClfError::Config("max_epochs must be positive".into()))?;
    Ok(ClfFit { model, best_epoch, history })
}

/// Trains on `real` plus `synthetic` images. `cfg.validation_share()` of the
/// real images (after a seeded shuffle) are held out for early stopping;
/// synthetic images only ever enter the training side.
pub fn train_classifier(
    real: &[&GrayImage],
    synthetic: &[&GrayImage],
    cfg: &ClfConfig,
    seed: u64,
) -> Result<ClfFit, ClfError> {
    if real.is_empty() {
        return Err(ClfError::Label("no real training images".into()));
    }
    let mut order: Vec<&GrayImage> = real.to_vec();
    order.shuffle(&mut component_rng(seed, "holdout"));
    let n_val = ((cfg.validation_share() * order.len() as f64).round() as usize).min(order.len() - 1);
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    train.extend_from_slice(synthetic);
    fit(&train, val, cfg, seed)
}

/// Percentage of images whose thresholded prediction (`P(AD) ≥ 0.5`) matches the label.
pub fn accuracy(model: &Cnn, images: &[&GrayImage]) -> Result<f64, ClfError> {
    if images.is_empty() {
        return Err(ClfError::Label("accuracy of an empty image set".into()));
    }
    let probs = model.predict_proba(images)?;
    let correct = probs.iter().zip(images).filter(|(p, im)| Class::from_probability(**p) == im.label).count();
    Ok(100.0 * correct as f64 / images.len() as f64)
}
