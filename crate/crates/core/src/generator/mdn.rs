//! Bivariate Gaussian mixture head.
//!
//! A raw head row holds `6 * M` values laid out as `[pi_hat; M]`, `[mu_x; M]`,
//! `[mu_y; M]`, `[sigma_hat_x; M]`, `[sigma_hat_y; M]`, `[rho_hat; M]`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::GeneratorError;

/// Largest admissible `|rho|`.
pub const RHO_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub std_x: Vec<f64>,
    pub std_y: Vec<f64>,
    pub corr: Vec<f64>,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Maps a raw head row onto constrained mixture parameters:
/// softmax weights, identity means, `exp` deviations and clamped `tanh` correlations.
pub fn mdn_params(raw: &[f64], n_mixtures: usize) -> Result<MixtureParams, GeneratorError> {
    let m = n_mixtures;
    if m == 0 || raw.len() != 6 * m {
        return Err(GeneratorError::Shape(format!("head row has {} values, expected 6 * {m}", raw.len())));
    }
    let logits = &raw[..m];
    let lse = log_sum_exp(logits);
    Ok(MixtureParams {
        weights: logits.iter().map(|v| (v - lse).exp()).collect(),
        mean_x: raw[m..2 * m].to_vec(),
        mean_y: raw[2 * m..3 * m].to_vec(),
        std_x: raw[3 * m..4 * m].iter().map(|v| v.exp()).collect(),
        std_y: raw[4 * m..5 * m].iter().map(|v| v.exp()).collect(),
        corr: raw[5 * m..].iter().map(|v| v.tanh().clamp(-RHO_LIMIT, RHO_LIMIT)).collect(),
    })
}

/// Log density of one bivariate normal component.
fn component_log_density(mx: f64, my: f64, sx: f64, sy: f64, rho: f64, x: f64, y: f64) -> f64 {
    let (nx, ny) = ((x - mx) / sx, (y - my) / sy);
    let one_minus = 1.0 - rho * rho;
    let z = nx * nx + ny * ny - 2.0 * rho * nx * ny;
    -(TAU.ln()) - sx.ln() - sy.ln() - 0.5 * one_minus.ln() - z / (2.0 * one_minus)
}

impl MixtureParams {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Log of the mixture density at `(x, y)`.
    pub fn log_density(&self, x: f64, y: f64) -> f64 {
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| {
                self.weights[k].ln()
                    + component_log_density(self.mean_x[k], self.mean_y[k], self.std_x[k], self.std_y[k], self.corr[k], x, y)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Negative log-likelihood of component `k` alone (without its weight).
    pub fn component_nll(&self, k: usize, x: f64, y: f64) -> f64 {
        -component_log_density(self.mean_x[k], self.mean_y[k], self.std_x[k], self.std_y[k], self.corr[k], x, y)
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.n_components() - 1
    }

    /// Draws a component by weight, then a point from that component.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let k = self.sample_component(rng);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let rho = self.corr[k];
        (
            self.mean_x[k] + self.std_x[k] * z1,
            self.mean_y[k] + self.std_y[k] * (rho * z1 + (1.0 - rho * rho).sqrt() * z2),
        )
    }
}

/// `-log sum_k pi_k N(target; mu_k, sigma_k, rho_k)`, via log-sum-exp.
pub fn mdn_nll(params: &MixtureParams, target: (f64, f64)) -> Result<f64, GeneratorError> {
    let loss = -params.log_density(target.0, target.1);
    if !loss.is_finite() {
        return Err(GeneratorError::Numerical(format!("mixture NLL is {loss}")));
    }
    Ok(loss)
}

/// Mean NLL over `rows` raw head rows and its gradient with respect to the raw values.
/// `targets` holds one `(x, y)` pair per row.
pub fn nll_rows(raw: &[f64], targets: &[f64], n_mixtures: usize) -> Result<(f64, Vec<f64>), GeneratorError> {
    let m = n_mixtures;
    let width = 6 * m;
    if m == 0 || !raw.len().is_multiple_of(width) || targets.len() != 2 * (raw.len() / width) {
        return Err(GeneratorError::Shape(format!(
            "{} raw values and {} targets for {m} mixtures",
            raw.len(),
            targets.len()
        )));
    }
    let rows = raw.len() / width;
    let inv_rows = 1.0 / rows.max(1) as f64;
    let mut grad = vec![0.0; raw.len()];
    let mut total = 0.0;
    let mut log_terms = vec![0.0; m];
    for r in 0..rows {
        let row = &raw[r * width..(r + 1) * width];
        let (x, y) = (targets[2 * r], targets[2 * r + 1]);
        let lse_pi = log_sum_exp(&row[..m]);
        for k in 0..m {
            let (sx, sy) = (row[3 * m + k].exp(), row[4 * m + k].exp());
            let rho = row[5 * m + k].tanh().clamp(-RHO_LIMIT, RHO_LIMIT);
            log_terms[k] = row[k] - lse_pi + component_log_density(row[m + k], row[2 * m + k], sx, sy, rho, x, y);
        }
        let lse = log_sum_exp(&log_terms);
        if !lse.is_finite() {
            return Err(GeneratorError::Numerical(format!("mixture log-likelihood {lse} at row {r}")));
        }
        total -= lse;
        let g = &mut grad[r * width..(r + 1) * width];
        for k in 0..m {
            let gamma = (log_terms[k] - lse).exp();
            let pi = (row[k] - lse_pi).exp();
            let (sx, sy) = (row[3 * m + k].exp(), row[4 * m + k].exp());
            let t = row[5 * m + k].tanh();
            let clamped = t.abs() > RHO_LIMIT;
            let rho = t.clamp(-RHO_LIMIT, RHO_LIMIT);
            let (nx, ny) = ((x - row[m + k]) / sx, (y - row[2 * m + k]) / sy);
            let c = 1.0 / (1.0 - rho * rho);
            let z = nx * nx + ny * ny - 2.0 * rho * nx * ny;
            g[k] = (pi - gamma) * inv_rows;
            g[m + k] = -gamma * c / sx * (nx - rho * ny) * inv_rows;
            g[2 * m + k] = -gamma * c / sy * (ny - rho * nx) * inv_rows;
            g[3 * m + k] = -gamma * (c * nx * (nx - rho * ny) - 1.0) * inv_rows;
            g[4 * m + k] = -gamma * (c * ny * (ny - rho * nx) - 1.0) * inv_rows;
            g[5 * m + k] = if clamped { 0.0 } else { -gamma * (nx * ny + rho * (1.0 - c * z)) * inv_rows };
        }
    }
    Ok((total * inv_rows, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::rng::rng_from_seed;
    use crate::neural::{grad_check, Tensor};

    fn single(mx: f64, my: f64, sx: f64, sy: f64, rho: f64) -> MixtureParams {
        MixtureParams { weights: vec![1.0], mean_x: vec![mx], mean_y: vec![my], std_x: vec![sx], std_y: vec![sy], corr: vec![rho] }
    }

    #[test]
    fn zero_raw_vector() {
        let p = mdn_params(&[0.0; 120], 20).unwrap();
        assert!(p.weights.iter().all(|&w| (w - 0.05).abs() < 1e-15));
        assert!(p.std_x.iter().chain(&p.std_y).all(|&s| s == 1.0));
        assert!(p.corr.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn rho_clamp_engages() {
        let mut raw = vec![0.0; 6];
        raw[5] = 100.0;
        assert_eq!(mdn_params(&raw, 1).unwrap().corr[0], RHO_LIMIT);
        raw[5] = -100.0;
        assert_eq!(mdn_params(&raw, 1).unwrap().corr[0], -RHO_LIMIT);
    }

    #[test]
    fn wrong_length_is_a_shape_error() {
        assert!(matches!(mdn_params(&[0.0; 7], 1), Err(GeneratorError::Shape(_))));
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let raw: Vec<f64> = (0..60).map(|_| rng.random_range(-30.0..30.0)).collect();
            let p = mdn_params(&raw, 10).unwrap();
            assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn peak_of_standard_component() {
        let loss = mdn_nll(&single(0.3, -0.2, 1.0, 1.0, 0.0), (0.3, -0.2)).unwrap();
        assert!((loss - TAU.ln()).abs() < 1e-12);
        assert!((loss - 1.837877).abs() < 1e-6);
    }

    #[test]
    fn duplicated_component_matches_single() {
        let one = single(0.5, 1.0, 0.7, 1.3, 0.4);
        let two = MixtureParams {
            weights: vec![0.5, 0.5],
            mean_x: vec![0.5; 2],
            mean_y: vec![1.0; 2],
            std_x: vec![0.7; 2],
            std_y: vec![1.3; 2],
            corr: vec![0.4; 2],
        };
        // Independent density oracle: the closed-form bivariate normal.
        let (x, y) = (-0.1, 2.0);
        let (nx, ny): (f64, f64) = ((x - 0.5) / 0.7, (y - 1.0) / 1.3);
        let z = nx * nx + ny * ny - 2.0 * 0.4 * nx * ny;
        let dens = (-z / (2.0 * (1.0 - 0.16))).exp() / (TAU * 0.7 * 1.3 * (1.0f64 - 0.16).sqrt());
        assert!((mdn_nll(&one, (x, y)).unwrap() + dens.ln()).abs() < 1e-12);
        assert!((mdn_nll(&two, (x, y)).unwrap() - mdn_nll(&one, (x, y)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mixture_loss_is_bounded_by_each_component() {
        let mut rng = rng_from_seed(8);
        for _ in 0..200 {
            let raw: Vec<f64> = (0..18).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = mdn_params(&raw, 3).unwrap();
            let (x, y) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let loss = mdn_nll(&p, (x, y)).unwrap();
            for k in 0..3 {
                assert!(loss <= p.component_nll(k, x, y) - p.weights[k].ln() + 1e-12);
            }
        }
    }

    #[test]
    fn fused_rows_match_the_scalar_path() {
        let mut rng = rng_from_seed(4);
        let raw: Vec<f64> = (0..3 * 24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (mean, _) = nll_rows(&raw, &targets, 4).unwrap();
        let expected: f64 = (0..3)
            .map(|r| mdn_nll(&mdn_params(&raw[r * 24..(r + 1) * 24], 4).unwrap(), (targets[2 * r], targets[2 * r + 1])).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((mean - expected).abs() < 1e-12);
    }

    fn nll_check(raw: Vec<f64>, targets: Vec<f64>, m: usize) -> f64 {
        let rows = raw.len() / (6 * m);
        let point = Tensor::matrix(rows, 6 * m, raw).unwrap();
        grad_check(
            |tape, v| {
                let (loss, grad) = nll_rows(tape.value(v).data(), &targets, m).map_err(|e| crate::neural::NeuralError::Numerical(e.to_string()))?;
                let g = Tensor::matrix(rows, 6 * m, grad)?;
                tape.scalar_loss(v, loss, g)
            },
            &point,
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn mean_gradient_is_target_offset() {
        // M = 1, sigma = 1, rho = 0: dL/dmu = mu - target.
        let raw = vec![0.0, 0.4, -0.3, 0.0, 0.0, 0.0];
        let (_, grad) = nll_rows(&raw, &[1.0, 0.5], 1).unwrap();
        assert!((grad[1] - (0.4 - 1.0)).abs() < 1e-12);
        assert!((grad[2] - (-0.3 - 0.5)).abs() < 1e-12);
        assert!(nll_check(raw, vec![1.0, 0.5], 1) < 1e-6);
    }

    #[test]
    fn gradients_pass_finite_differences_at_random_points() {
        let mut rng = rng_from_seed(21);
        for trial in 0..10 {
            let m = 1 + trial % 4;
            let rows = 1 + trial % 3;
            let raw: Vec<f64> = (0..rows * 6 * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let targets: Vec<f64> = (0..2 * rows).map(|_| rng.random_range(-2.0..2.0)).collect();
            let err = nll_check(raw, targets, m);
            assert!(err < 1e-6, "trial {trial}: {err}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        // Midpoint quadrature on a wide grid, independent of the sampler.
        let mut rng = rng_from_seed(5);
        for m in 1..=3 {
            let mut raw: Vec<f64> = (0..6 * m).map(|_| rng.random_range(-0.5..0.5)).collect();
            for k in 0..m {
                raw[3 * m + k] = rng.random_range(-0.7..0.3);
                raw[4 * m + k] = rng.random_range(-0.7..0.3);
            }
            let p = mdn_params(&raw, m).unwrap();
            let (lo, hi, n) = (-9.0, 9.0, 600);
            let h = (hi - lo) / n as f64;
            let mut mass = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h);
                    mass += p.log_density(x, y).exp() * h * h;
                }
            }
            assert!((mass - 1.0).abs() < 1e-2, "M={m}: mass {mass}");
        }
    }
}
