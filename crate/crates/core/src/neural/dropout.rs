use rand::Rng;

use super::rng::rng_from_seed;
use super::{NeuralError, Tensor};

/// Inverted-dropout mask: each entry is `0` with probability `1 - keep`, else `1 / keep`.
pub fn dropout_mask<R: Rng + ?Sized>(shape: &[usize], keep: f64, rng: &mut R) -> Result<Tensor, NeuralError> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(NeuralError::InvalidArgument(format!("keep probability {keep} not in (0, 1]")));
    }
    let n: usize = shape.iter().product();
    let scale = 1.0 / keep;
    let data = (0..n)
        .map(|_| if keep >= 1.0 || rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

/// Inverted dropout. Identity when `training` is false or `keep == 1`.
pub fn dropout(t: &Tensor, keep: f64, seed: u64, training: bool) -> Result<Tensor, NeuralError> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(NeuralError::InvalidArgument(format!("keep probability {keep} not in (0, 1]")));
    }
    if !training || keep >= 1.0 {
        return Ok(t.clone());
    }
    let mask = dropout_mask(t.shape(), keep, &mut rng_from_seed(seed))?;
    Ok(t.zip_map(&mask, |v, m| v * m))
}
