use super::{NeuralError, Tensor};

/// Momentum SGD state. `velocity` mirrors the parameter shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub velocity: Vec<Tensor>,
}

impl OptimState {
    pub fn new(learning_rate: f64, momentum: f64, nesterov: bool, params: &[Tensor]) -> Result<Self, NeuralError> {
        if !(learning_rate > 0.0) || !(0.0..1.0).contains(&momentum) {
            return Err(NeuralError::InvalidArgument(format!(
                "learning rate {learning_rate} / momentum {momentum} out of range"
            )));
        }
        Ok(Self {
            learning_rate,
            momentum,
            nesterov,
            velocity: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        })
    }
}

/// One SGD update in place.
///
/// With `v' = m*v - lr*g`, plain momentum sets `p' = p + v'` and Nesterov sets
/// `p' = p + m*v' - lr*g`.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], state: &mut OptimState) -> Result<(), NeuralError> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(NeuralError::Shape(format!(
            "{} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(&state.velocity) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(NeuralError::Shape(format!(
                "param {:?}, grad {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
    }
    let (lr, m) = (state.learning_rate, state.momentum);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        for ((pi, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            let next = m * *vi - lr * gi;
            *vi = next;
            *pi += if state.nesterov { m * next - lr * gi } else { next };
        }
    }
    Ok(())
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let f = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= f);
        }
    }
    norm
}
