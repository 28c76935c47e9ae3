use super::{NeuralError, Tape, Tensor, Var};

fn evaluate<F>(f: &F, points: &[Tensor]) -> Result<f64, NeuralError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NeuralError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = points.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out);
    if value.len() != 1 {
        return Err(NeuralError::Shape(format!("grad_check needs a scalar, got {:?}", value.shape())));
    }
    let v = value.data()[0];
    if !v.is_finite() {
        return Err(NeuralError::Numerical(format!("function value {v} at probe point")));
    }
    Ok(v)
}

/// Largest relative disagreement between reverse-mode and central-difference
/// gradients of `f` over every coordinate of every input.
///
/// The relative error of one coordinate is `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`.
pub fn grad_check_many<F>(f: F, points: &[Tensor], eps: f64) -> Result<f64, NeuralError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NeuralError>,
{
    if !(eps > 0.0) {
        return Err(NeuralError::InvalidArgument(format!("eps {eps} must be positive")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = points.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let base = tape.value(out).data().first().copied().unwrap_or(f64::NAN);
    if !base.is_finite() {
        return Err(NeuralError::Numerical(format!("function value {base} at the check point")));
    }
    let mut grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut probe = points.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.take_or_zeros(*var, points[i].shape());
        for j in 0..points[i].len() {
            let orig = points[i].data()[j];
            probe[i].data_mut()[j] = orig + eps;
            let up = evaluate(&f, &probe)?;
            probe[i].data_mut()[j] = orig - eps;
            let down = evaluate(&f, &probe)?;
            probe[i].data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * eps);
            let ad = analytic.data()[j];
            let err = (ad - fd).abs() / 1f64.max(ad.abs()).max(fd.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64, NeuralError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, NeuralError>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(point), eps)
}
