//! Deterministic pseudo-handwriting corpora for tests and desk-scale runs.
//!
//! Each axis is a slow drift plus 2-4 random-phase sinusoids plus white noise.
//! The pen alternates between on-paper and in-air runs. AD subjects get the
//! noise amplitude and the in-air run lengths scaled by `1 + separation`.

use std::f64::consts::TAU;

use rand::Rng;

use super::Corpus;
use crate::ink::{Class, PointSample, Recording};
use crate::neural::rng::component_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixtureParams {
    pub n_per_class: usize,
    pub task_id: u8,
    /// Class-B (AD) scaling of noise and in-air durations; 0 means identical classes.
    pub separation: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Peak acceleration of each sinusoidal component, in tablet units per sample².
    pub accel_amplitude: f64,
    pub noise_std: f64,
    /// Milliseconds between samples.
    pub sample_period: f64,
}

impl FixtureParams {
    pub fn new(n_per_class: usize, task_id: u8, separation: f64) -> Self {
        Self {
            n_per_class,
            task_id,
            separation,
            min_len: 600,
            max_len: 800,
            accel_amplitude: 3.0,
            noise_std: 0.5,
            sample_period: 5.0,
        }
    }
}

/// Shorthand for [`FixtureParams::new`] followed by [`FixtureParams::build`].
pub fn make_fixture_corpus(seed: u64, n_per_class: usize, task_id: u8, separation: f64) -> Corpus {
    FixtureParams::new(n_per_class, task_id, separation).build(seed)
}

impl FixtureParams {
    pub fn build(&self, seed: u64) -> Corpus {
        let mut recs = Vec::with_capacity(2 * self.n_per_class);
        for class in Class::ALL {
            for i in 0..self.n_per_class {
                recs.push(self.subject(seed, class, i));
            }
        }
        Corpus::new(recs).expect("fixture subjects are unique")
    }

    fn subject(&self, seed: u64, class: Class, index: usize) -> Recording {
        let subject_id = format!("{}_{:03}", class.as_str(), index);
        let mut rng = component_rng(seed, &format!("fixture/t{}/{subject_id}", self.task_id));
        let factor = if class == Class::Ad { 1.0 + self.separation } else { 1.0 };
        let len = rng.random_range(self.min_len..=self.max_len);
        let x = self.axis(&mut rng, len, 1.5, self.noise_std * factor);
        let y = self.axis(&mut rng, len, 0.0, self.noise_std * factor);

        let mut samples = Vec::with_capacity(len);
        let mut pen_down = true;
        let mut remaining = rng.random_range(25..=45);
        for i in 0..len {
            if remaining == 0 {
                pen_down = !pen_down;
                remaining = if pen_down {
                    rng.random_range(25..=45)
                } else {
                    ((rng.random_range(8.0..=16.0) * factor) as usize).max(1)
                };
            }
            remaining -= 1;
            let pressure = if pen_down { rng.random_range(200.0..800.0f64).round() } else { 0.0 };
            samples.push(PointSample { t: i as f64 * self.sample_period, x: x[i], y: y[i], pen_down, pressure });
        }
        Recording::new(subject_id, self.task_id, class, samples).expect("fixture recordings are valid")
    }

    fn axis<R: Rng>(&self, rng: &mut R, len: usize, drift: f64, noise: f64) -> Vec<f64> {
        let k = rng.random_range(2..=4);
        let components: Vec<(f64, f64, f64)> = (0..k)
            .map(|_| {
                let freq = rng.random_range(1.0 / 30.0..1.0 / 12.0);
                let accel = rng.random_range(0.5..1.0) * self.accel_amplitude;
                let amplitude = accel / (TAU * freq).powi(2);
                (amplitude, freq, rng.random_range(0.0..TAU))
            })
            .collect();
        let normal = rand_distr::StandardNormal;
        (0..len)
            .map(|t| {
                let t = t as f64;
                let smooth: f64 = components.iter().map(|(a, f, p)| a * (TAU * f * t + p).sin()).sum();
                let eps: f64 = rng.sample(normal);
                drift * t + smooth + noise * eps
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ink::{compute_acceleration, segment_points, MovementMode, Provenance};

    #[test]
    fn counts_and_ids() {
        let c = make_fixture_corpus(3, 10, 13, 1.0);
        assert_eq!(c.len(), 20);
        assert_eq!(c.n_subjects(), 20);
        assert_eq!(c.class_counts(), (10, 10));
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(make_fixture_corpus(5, 4, 16, 0.5), make_fixture_corpus(5, 4, 16, 0.5));
        assert_ne!(make_fixture_corpus(5, 4, 16, 0.5), make_fixture_corpus(6, 4, 16, 0.5));
    }

    #[test]
    fn both_modes_present() {
        for rec in make_fixture_corpus(1, 5, 13, 2.0).recordings() {
            assert!(segment_points(rec, MovementMode::InAir).unwrap().len() > 30);
            assert!(segment_points(rec, MovementMode::OnPaper).unwrap().len() > 30);
        }
    }

    #[test]
    fn in_air_share_grows_with_separation() {
        let share = |c: &Corpus, class: Class| {
            let (mut air, mut all) = (0usize, 0usize);
            for r in c.recordings().iter().filter(|r| r.label == class) {
                air += r.samples.iter().filter(|s| !s.pen_down).count();
                all += r.samples.len();
            }
            air as f64 / all as f64
        };
        let c = make_fixture_corpus(2, 20, 13, 2.0);
        assert!(share(&c, Class::Ad) > share(&c, Class::Healthy) + 0.1);
    }

    #[test]
    fn acceleration_variance_is_positive() {
        let c = make_fixture_corpus(2, 2, 13, 0.0);
        let r = &c.recordings()[0];
        let src = Provenance { subject_id: r.subject_id.clone(), task_id: r.task_id };
        let a = compute_acceleration(&r.samples, r.label, src).unwrap();
        assert!(a.ax.iter().map(|v| v * v).sum::<f64>() > 0.0);
    }
}
