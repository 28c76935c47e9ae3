//! Forward kernels shared by the tape and by the tape-free inference paths.

use super::{NeuralError, Tensor};

/// `c (+)= op(a) * op(b)` where `op(a)` is `m x k` and `op(b)` is `k x n`.
///
/// `trans_a` means `a` is stored as `k x m`; `trans_b` means `b` is stored as `n x k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover the strided extents asserted above and `c` does not alias `a`/`b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NeuralError> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(NeuralError::Shape(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.data(), false, b.data(), false, &mut out, false);
    Tensor::new(vec![m, n], out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Adds `bias` (length `cols`) to every row of `data`.
pub fn add_row_bias(data: &mut [f64], bias: &[f64]) {
    let cols = bias.len();
    for row in data.chunks_exact_mut(cols) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Geometry of a stride-1 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        self.height + 2 * self.pad + 1 - self.kernel_h
    }

    pub fn out_w(&self) -> usize {
        self.width + 2 * self.pad + 1 - self.kernel_w
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    fn in_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Unfolds one `C x H x W` image into a `(C*kh*kw) x (Ho*Wo)` column matrix.
fn im2col(image: &[f64], g: &ConvGeometry, cols: &mut [f64]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let spatial = ho * wo;
    let pad = g.pad as isize;
    for c in 0..g.channels {
        let plane = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let dst = &mut cols[row * spatial..(row + 1) * spatial];
                for oy in 0..ho {
                    let iy = oy as isize + ky as isize - pad;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= g.height as isize {
                        line.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - pad;
                        *v = if ix < 0 || ix >= g.width as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Folds a column matrix back onto an image, accumulating overlaps.
fn col2im(cols: &[f64], g: &ConvGeometry, image: &mut [f64]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let spatial = ho * wo;
    let pad = g.pad as isize;
    for c in 0..g.channels {
        let plane = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel_h {
            for kx in 0..g.kernel_w {
                let row = (c * g.kernel_h + ky) * g.kernel_w + kx;
                let src = &cols[row * spatial..(row + 1) * spatial];
                for oy in 0..ho {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..wo {
                        let ix = ox as isize + kx as isize - pad;
                        if ix >= 0 && ix < g.width as isize {
                            dst[ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn conv_geometry(input: &Tensor, weight: &Tensor, pad: usize) -> Result<ConvGeometry, NeuralError> {
    let (is, ws) = (input.shape(), weight.shape());
    if is.len() != 4 || ws.len() != 4 || is[1] != ws[1] {
        return Err(NeuralError::Shape(format!("conv2d input {is:?} weight {ws:?}")));
    }
    let g = ConvGeometry {
        channels: is[1],
        height: is[2],
        width: is[3],
        kernel_h: ws[2],
        kernel_w: ws[3],
        pad,
    };
    if g.height + 2 * pad < g.kernel_h || g.width + 2 * pad < g.kernel_w {
        return Err(NeuralError::Shape(format!("kernel {ws:?} larger than padded input {is:?}")));
    }
    Ok(g)
}

/// Stride-1 convolution of `[N, C, H, W]` by `[O, C, kh, kw]` plus per-filter bias.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &Tensor, pad: usize) -> Result<Tensor, NeuralError> {
    let g = conv_geometry(input, weight, pad)?;
    let batch = input.shape()[0];
    let filters = weight.shape()[0];
    if bias.len() != filters {
        return Err(NeuralError::Shape(format!("conv2d bias {:?} for {filters} filters", bias.shape())));
    }
    let spatial = g.out_h() * g.out_w();
    let mut cols = vec![0.0; g.patch_len() * spatial];
    let mut out = vec![0.0; batch * filters * spatial];
    for n in 0..batch {
        im2col(&input.data()[n * g.in_len()..(n + 1) * g.in_len()], &g, &mut cols);
        let dst = &mut out[n * filters * spatial..(n + 1) * filters * spatial];
        gemm(filters, g.patch_len(), spatial, weight.data(), false, &cols, false, dst, false);
        for (o, plane) in dst.chunks_exact_mut(spatial).enumerate() {
            let b = bias.data()[o];
            plane.iter_mut().for_each(|v| *v += b);
        }
    }
    Tensor::new(vec![batch, filters, g.out_h(), g.out_w()], out)
}

/// Gradients of [`conv2d`] with respect to input (if requested), weight and bias.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    pad: usize,
    want_input: bool,
) -> Result<(Option<Tensor>, Tensor, Tensor), NeuralError> {
    let g = conv_geometry(input, weight, pad)?;
    let batch = input.shape()[0];
    let filters = weight.shape()[0];
    let spatial = g.out_h() * g.out_w();
    let patch = g.patch_len();
    let mut cols = vec![0.0; patch * spatial];
    let mut dcols = vec![0.0; patch * spatial];
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; filters];
    let mut dx = if want_input { vec![0.0; input.len()] } else { Vec::new() };
    for n in 0..batch {
        let dy = &grad_out.data()[n * filters * spatial..(n + 1) * filters * spatial];
        for (o, plane) in dy.chunks_exact(spatial).enumerate() {
            db[o] += plane.iter().sum::<f64>();
        }
        im2col(&input.data()[n * g.in_len()..(n + 1) * g.in_len()], &g, &mut cols);
        gemm(filters, spatial, patch, dy, false, &cols, true, &mut dw, true);
        if want_input {
            gemm(patch, filters, spatial, weight.data(), true, dy, false, &mut dcols, false);
            col2im(&dcols, &g, &mut dx[n * g.in_len()..(n + 1) * g.in_len()]);
        }
    }
    let dx = if want_input { Some(Tensor::new(input.shape().to_vec(), dx)?) } else { None };
    Ok((dx, Tensor::new(weight.shape().to_vec(), dw)?, Tensor::new(vec![filters], db)?))
}

/// 2x2 stride-2 max pooling; returns the pooled tensor and the flat source index of each maximum.
pub fn max_pool2(input: &Tensor) -> Result<(Tensor, Vec<usize>), NeuralError> {
    let s = input.shape();
    if s.len() != 4 || s[2] < 2 || s[3] < 2 {
        return Err(NeuralError::Shape(format!("max_pool2 input {s:?}")));
    }
    let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * ho * wo);
    let mut argmax = Vec::with_capacity(planes * ho * wo);
    let data = input.data();
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![s[0], s[1], ho, wo], out)?, argmax))
}
