use rand::Rng;
use rand_distr::StandardNormal;
use synthwrite::corpus::make_fixture_corpus;
use synthwrite::generator::{mdn_params, sample_sequence, train_generator, training_windows, GeneratorConfig, GeneratorModel};
use synthwrite::ink::{recording_series, z_normalize, AccelSeries, Class, MovementMode, Provenance};
use synthwrite::neural::rng::rng_from_seed;

/// 0.99 quantile of the chi-square distribution with 19 degrees of freedom.
const CHI2_19_P99: f64 = 36.191;

fn frozen_mixture() -> synthwrite::generator::MixtureParams {
    let mut raw = vec![0.0; 6 * 20];
    for k in 0..20 {
        raw[k] = ((k * 37) % 11) as f64 * 0.3 - 1.5;
    }
    mdn_params(&raw, 20).unwrap()
}

#[test]
fn component_frequencies_match_weights() {
    let mix = frozen_mixture();
    let draws = 100_000;
    let mut counts = [0usize; 20];
    let mut rng = rng_from_seed(2024);
    for _ in 0..draws {
        counts[mix.sample_component(&mut rng)] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&mix.weights)
        .map(|(&c, &p)| {
            let expected = p * draws as f64;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    assert!(chi2 < CHI2_19_P99, "chi-square {chi2}");
}

#[test]
fn unit_gaussian_head_samples_have_unit_moments() {
    let cfg = GeneratorConfig { hidden_size: 8, n_mixtures: 1, ..GeneratorConfig::default() };
    let mut model = GeneratorModel::init(cfg, Class::Healthy, 13).unwrap();
    // Zero weights make the head emit the all-zero raw vector: π=1, μ=0, σ=1, ρ=0.
    for t in model.params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let mut xs = Vec::new();
    for seed in 0..67 {
        let s = sample_sequence(&model, seed);
        xs.extend(s.ax);
        xs.extend(s.ay);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(n >= 1e4);
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn training_loss_falls_over_first_ten_epochs() {
    let corpus = make_fixture_corpus(9, 20, 13, 1.0);
    let series: Vec<AccelSeries> = corpus
        .recordings()
        .iter()
        .filter(|r| r.label == Class::Ad)
        .map(|r| recording_series(r, MovementMode::Both).unwrap())
        .collect();
    let cfg =
        GeneratorConfig { hidden_size: 16, n_mixtures: 5, epochs: 10, batch_size: 4, seed: 4, ..GeneratorConfig::default() };
    let fit = train_generator(&series, &cfg).unwrap();
    let h = &fit.history;
    assert_eq!(h.len(), 10);
    assert!(h.iter().all(|e| e.train.is_finite()));
    assert!(h[9].train < h[0].train, "{h:?}");

    let refs: Vec<&AccelSeries> = series.iter().collect();
    let windows = training_windows(&refs, cfg.seq_len);
    let windows: Vec<&[(f64, f64)]> = windows.iter().map(Vec::as_slice).collect();
    let initial = GeneratorModel::init(cfg.clone(), Class::Ad, 13).unwrap();
    let before = initial.evaluate_loss(&windows).unwrap();
    let after = fit.model.evaluate_loss(&windows).unwrap();
    println!("loss before {before}, after {after}, history {h:?}");
    assert!(after < before, "{before} -> {after}");
}

fn ar1_series(n: usize, len: usize, phi: f64, seed: u64) -> Vec<AccelSeries> {
    let mut rng = rng_from_seed(seed);
    let channel = |rng: &mut synthwrite::neural::rng::ComponentRng| {
        let mut x = 0.0;
        (0..len)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = phi * x + (1.0 - phi * phi).sqrt() * e;
                x
            })
            .collect::<Vec<f64>>()
    };
    (0..n)
        .map(|i| {
            let (ax, ay) = (channel(&mut rng), channel(&mut rng));
            let source = Provenance { subject_id: format!("ar_{i}"), task_id: 13 };
            z_normalize(&AccelSeries::new(ax, ay, Class::Ad, source).unwrap())
        })
        .collect()
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let data = ar1_series(4, 40, 0.5, 3);
    let cfg = GeneratorConfig { hidden_size: 6, n_mixtures: 2, seq_len: 20, epochs: 2, seed: 11, ..GeneratorConfig::default() };
    let a = train_generator(&data, &cfg).unwrap();
    let b = train_generator(&data, &cfg).unwrap();
    assert_eq!(a.model.to_checkpoint().to_bytes().unwrap(), b.model.to_checkpoint().to_bytes().unwrap());
}
