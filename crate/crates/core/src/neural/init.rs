use rand_distr::{Distribution, Normal};

use super::rng::rng_from_seed;
use super::{NeuralError, Tensor};

/// Fan-in and fan-out of a weight shape: `[in, out]` for dense layers and
/// `[out, in, kh, kw]` for convolution filters.
pub fn fans(shape: &[usize]) -> Result<(usize, usize), NeuralError> {
    if shape.contains(&0) {
        return Err(NeuralError::InvalidShape(format!("zero-sized dimension in {shape:?}")));
    }
    match shape {
        [fan_in, fan_out] => Ok((*fan_in, *fan_out)),
        [out, inp, rest @ ..] if !rest.is_empty() => {
            let field: usize = rest.iter().product();
            Ok((inp * field, out * field))
        }
        _ => Err(NeuralError::InvalidShape(format!("cannot derive fans from {shape:?}"))),
    }
}

/// Glorot normal initialization: entries ~ N(0, 2 / (fan_in + fan_out)).
pub fn glorot_init(shape: &[usize], seed: u64) -> Result<Tensor, NeuralError> {
    let (fan_in, fan_out) = fans(shape)?;
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| NeuralError::InvalidArgument(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let n = shape.iter().product();
    let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Bias vectors start at exactly zero.
pub fn zero_bias(len: usize) -> Tensor {
    Tensor::zeros(&[len])
}
