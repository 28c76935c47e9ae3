use super::GeneratorModel;
use crate::ink::{AccelSeries, Provenance};
use crate::neural::rng::rng_from_seed;

/// Autoregressively samples `seq_len` points. Sampling starts from the origin
/// with a zero state and feeds every drawn point back as the next input.
pub fn sample_sequence(model: &GeneratorModel, seed: u64) -> AccelSeries {
    let mut rng = rng_from_seed(seed);
    let mut state = model.zero_state();
    let n = model.config.seq_len;
    let (mut ax, mut ay) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut prev = (0.0, 0.0);
    for _ in 0..n {
        let mix = model
            .step_mixture(&mut state, prev)
            .expect("head width is fixed by the model configuration");
        prev = mix.sample_point(&mut rng);
        ax.push(prev.0);
        ay.push(prev.1);
    }
    let source = Provenance { subject_id: format!("syn_{}", model.label), task_id: model.task_id };
    AccelSeries::new(ax, ay, model.label, source).expect("seq_len is positive")
}
