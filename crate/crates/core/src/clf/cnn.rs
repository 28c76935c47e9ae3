use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClfError;
use crate::imaging::{GrayImage, IMAGE_SIDE};
use crate::neural::ops::{sigmoid, softplus};
use crate::neural::rng::derive_seed;
use crate::neural::{glorot_init, zero_bias, Checkpoint, ParamStore, Tape, Tensor, Var};

/// Convolutional binary classifier layout. Convolutions are 3×3, stride 1,
/// zero padding 1, each followed by ReLU.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    /// Output channels of each convolution layer.
    pub conv_channels: Vec<usize>,
    /// Zero-based conv layer indices followed by a 2×2 max-pool.
    pub pool_after: Vec<usize>,
    pub dense_units: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self { conv_channels: vec![32, 32, 64, 64, 128], pool_after: vec![1, 3], dense_units: 256 }
    }
}

impl CnnArch {
    /// Same topology with 4× narrower layers.
    pub fn compact() -> Self {
        Self { conv_channels: vec![8, 8, 16, 16, 32], pool_after: vec![1, 3], dense_units: 64 }
    }

    pub fn validate(&self) -> Result<(), ClfError> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) || self.dense_units == 0 {
            return Err(ClfError::Config(format!("architecture {self:?} has an empty layer")));
        }
        if let Some(&bad) = self.pool_after.iter().find(|&&i| i >= self.conv_channels.len()) {
            return Err(ClfError::Config(format!("pool after missing conv layer {bad}")));
        }
        if IMAGE_SIDE >> self.pool_after.len() == 0 {
            return Err(ClfError::Config("too many pooling layers for a 64x64 input".into()));
        }
        Ok(())
    }

    fn final_side(&self) -> usize {
        IMAGE_SIDE >> self.pool_after.len()
    }

    fn flat_len(&self) -> usize {
        self.conv_channels.last().copied().unwrap_or(0) * self.final_side() * self.final_side()
    }
}

/// A CNN emitting one logit per image; `sigmoid(logit)` is `P(AD)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    pub arch: CnnArch,
    pub params: ParamStore,
}

/// Mean binary cross entropy on logits and its gradient.
pub fn bce_with_logits(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len().max(1) as f64;
    let loss = logits.iter().zip(targets).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / n;
    let grad = logits.iter().zip(targets).map(|(&z, &y)| (sigmoid(z) - y) / n).collect();
    (loss, grad)
}

impl Cnn {
    /// Glorot-normal weights and zero biases, each tensor seeded from `seed` and its name.
    pub fn init(arch: CnnArch, seed: u64) -> Result<Self, ClfError> {
        arch.validate()?;
        let mut params = ParamStore::new();
        let glorot = |params: &mut ParamStore, name: String, shape: &[usize]| -> Result<(), ClfError> {
            let t = glorot_init(shape, derive_seed(seed, &format!("init/{name}")))?;
            params.push(name, t);
            Ok(())
        };
        let mut in_ch = 1;
        for (i, &out_ch) in arch.conv_channels.iter().enumerate() {
            glorot(&mut params, format!("conv{i}.w"), &[out_ch, in_ch, 3, 3])?;
            params.push(format!("conv{i}.b"), zero_bias(out_ch));
            in_ch = out_ch;
        }
        glorot(&mut params, "fc1.w".into(), &[arch.flat_len(), arch.dense_units])?;
        params.push("fc1.b", zero_bias(arch.dense_units));
        glorot(&mut params, "fc2.w".into(), &[arch.dense_units, 1])?;
        params.push("fc2.b", zero_bias(1));
        Ok(Self { arch, params })
    }

    /// Records the forward pass for a `[B, 1, 64, 64]` input; returns `[B, 1]` logits.
    pub fn logits_on_tape(&self, tape: &mut Tape, vars: &[Var], input: Var) -> Result<Var, ClfError> {
        let batch = tape.value(input).shape()[0];
        let mut x = input;
        let n_conv = self.arch.conv_channels.len();
        for i in 0..n_conv {
            x = tape.conv2d(x, vars[2 * i], vars[2 * i + 1], 1)?;
            x = tape.relu(x);
            if self.arch.pool_after.contains(&i) {
                x = tape.max_pool2(x)?;
            }
        }
        x = tape.reshape(x, &[batch, self.arch.flat_len()])?;
        let base = 2 * n_conv;
        x = tape.matmul(x, vars[base])?;
        x = tape.add_row_bias(x, vars[base + 1])?;
        x = tape.relu(x);
        x = tape.matmul(x, vars[base + 2])?;
        Ok(tape.add_row_bias(x, vars[base + 3])?)
    }

    /// Mean BCE of a batch, recorded on `tape` as a fused loss node.
    pub fn loss_on_tape(&self, tape: &mut Tape, vars: &[Var], images: &[&GrayImage]) -> Result<Var, ClfError> {
        let input = tape.constant(stack(images));
        let logits = self.logits_on_tape(tape, vars, input)?;
        let targets: Vec<f64> = images.iter().map(|im| im.label.target()).collect();
        let (loss, grad) = bce_with_logits(tape.value(logits).data(), &targets);
        let grad = Tensor::new(vec![images.len(), 1], grad)?;
        Ok(tape.scalar_loss(logits, loss, grad)?)
    }

    pub fn logits(&self, images: &[&GrayImage]) -> Result<Vec<f64>, ClfError> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(16) {
            let mut tape = Tape::new();
            let vars: Vec<Var> = self.params.tensors().iter().map(|t| tape.constant(t.clone())).collect();
            let input = tape.constant(stack(chunk));
            let logits = self.logits_on_tape(&mut tape, &vars, input)?;
            out.extend_from_slice(tape.value(logits).data());
        }
        Ok(out)
    }

    /// `P(AD)` for each image.
    pub fn predict_proba(&self, images: &[&GrayImage]) -> Result<Vec<f64>, ClfError> {
        Ok(self.logits(images)?.into_iter().map(sigmoid).collect())
    }

    /// Mean BCE over `images` without recording gradients.
    pub fn mean_loss(&self, images: &[&GrayImage]) -> Result<f64, ClfError> {
        let logits = self.logits(images)?;
        let targets: Vec<f64> = images.iter().map(|im| im.label.target()).collect();
        Ok(bce_with_logits(&logits, &targets).0)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.params.to_checkpoint(serde_json::json!({ "kind": "cnn", "arch": self.arch }))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ClfError> {
        if ckpt.meta.get("kind").and_then(|k| k.as_str()) != Some("cnn") {
            return Err(ClfError::Checkpoint("not a CNN checkpoint".into()));
        }
        let arch: CnnArch = serde_json::from_value(ckpt.meta["arch"].clone())
            .map_err(|e| ClfError::Checkpoint(format!("architecture: {e}")))?;
        let template = Self::init(arch.clone(), 0)?;
        Ok(Self { arch, params: ParamStore::from_checkpoint(ckpt, &template.params)? })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClfError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ClfError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Subtracted from every pixel before the first convolution.
pub const INPUT_CENTER: f64 = 0.5;

/// Packs images into a `[B, 1, 64, 64]` tensor, with pixels shifted from
/// [0, 1] to [-0.5, 0.5].
pub fn stack(images: &[&GrayImage]) -> Tensor {
    let mut data = Vec::with_capacity(images.len() * IMAGE_SIDE * IMAGE_SIDE);
    for im in images {
        data.extend(im.pixels().iter().map(|p| p - INPUT_CENTER));
    }
    Tensor::new(vec![images.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data).expect("fixed image size")
}
