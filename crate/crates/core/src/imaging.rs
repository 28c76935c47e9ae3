//! Series to grayscale image conversion.
//!
//! Each channel is z-normalized, the two channels are interleaved
//! (`ax[0], ay[0], ax[1], ...`) into a zero-padded square matrix, the matrix is
//! min-max scaled to `[0, 1]` and finally resampled to 64×64 with a
//! renormalized Lanczos-3 kernel.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use crate::ink::{z_normalize, AccelSeries, Class, Provenance};
use crate::neural::Tensor;

pub const IMAGE_SIDE: usize = 64;
pub const LANCZOS_A: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    /// Row-major, `IMAGE_SIDE²` values in `[0, 1]`.
    pixels: Vec<f64>,
    pub label: Class,
    pub source: Provenance,
}

impl GrayImage {
    /// Panics if `pixels` is not 64×64 or leaves `[0, 1]`.
    pub fn new(pixels: Vec<f64>, label: Class, source: Provenance) -> Self {
        assert_eq!(pixels.len(), IMAGE_SIDE * IMAGE_SIDE, "image must be {IMAGE_SIDE}x{IMAGE_SIDE}");
        assert!(pixels.iter().all(|p| (0.0..=1.0).contains(p)), "pixel outside [0, 1]");
        Self { pixels, label, source }
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * IMAGE_SIDE + col]
    }

    /// `[1, 64, 64]` tensor (one input channel).
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![1, IMAGE_SIDE, IMAGE_SIDE], self.pixels.clone()).expect("fixed image size")
    }

    /// Binary PGM (P5), 8 bits per pixel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
        out.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_pgm())
    }
}

/// Interleaves the channels and fills an `n×n` matrix row-major, zero padded,
/// with `n = ceil(sqrt(2L))`.
pub fn series_to_matrix(series: &AccelSeries) -> Tensor {
    let len = 2 * series.len();
    let mut side = (len as f64).sqrt().ceil() as usize;
    while side * side < len {
        side += 1;
    }
    while side > 1 && (side - 1) * (side - 1) >= len {
        side -= 1;
    }
    let mut data = vec![0.0; side * side];
    for (i, (x, y)) in series.ax.iter().zip(&series.ay).enumerate() {
        data[2 * i] = *x;
        data[2 * i + 1] = *y;
    }
    Tensor::new(vec![side, side], data).expect("square shape")
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Lanczos window `sinc(x)·sinc(x/a)` on `|x| < a`.
pub fn lanczos_kernel(x: f64, a: f64) -> f64 {
    if x.abs() >= a {
        0.0
    } else {
        sinc(x) * sinc(x / a)
    }
}

/// Per-output-index `(source index, weight)` lists for one axis. Weights sum to 1.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    // Widen the kernel when shrinking so it acts as a low-pass filter.
    let stretch = scale.max(1.0);
    let support = LANCZOS_A * stretch;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor() as i64;
            let hi = (center + support).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for j in lo..=hi {
                let w = lanczos_kernel((j as f64 - center) / stretch, LANCZOS_A);
                if w == 0.0 {
                    continue;
                }
                let idx = j.clamp(0, n_in as i64 - 1) as usize;
                match taps.iter_mut().find(|(k, _)| *k == idx) {
                    Some(tap) => tap.1 += w,
                    None => taps.push((idx, w)),
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

/// Separable Lanczos-3 resampling of a square matrix to `out_side × out_side`.
pub fn lanczos_resize(matrix: &Tensor, out_side: usize) -> Tensor {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    assert!(rows >= 1 && cols >= 1 && out_side >= 1, "empty matrix");
    let src = matrix.data();
    let col_w = axis_weights(cols, out_side);
    let row_w = axis_weights(rows, out_side);

    let mut horizontal = vec![0.0; rows * out_side];
    for r in 0..rows {
        let line = &src[r * cols..(r + 1) * cols];
        for (c, taps) in col_w.iter().enumerate() {
            horizontal[r * out_side + c] = taps.iter().map(|&(j, w)| w * line[j]).sum();
        }
    }
    let mut out = vec![0.0; out_side * out_side];
    for (r, taps) in row_w.iter().enumerate() {
        for c in 0..out_side {
            out[r * out_side + c] = taps.iter().map(|&(j, w)| w * horizontal[j * out_side + c]).sum();
        }
    }
    Tensor::new(vec![out_side, out_side], out).expect("square shape")
}

/// Scales values to `[0, 1]`; a constant input becomes all 0.5.
pub fn min_max_normalize(values: &mut [f64]) {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range > 0.0 && range.is_finite() {
        values.iter_mut().for_each(|v| *v = (*v - lo) / range);
    } else {
        values.iter_mut().for_each(|v| *v = 0.5);
    }
}

pub fn series_to_image(series: &AccelSeries) -> GrayImage {
    let normalized = z_normalize(series);
    let mut matrix = series_to_matrix(&normalized);
    min_max_normalize(matrix.data_mut());
    let resized = lanczos_resize(&matrix, IMAGE_SIDE);
    let pixels = resized.into_data().into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
    GrayImage::new(pixels, series.label, series.source.clone())
}
