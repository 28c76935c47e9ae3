//! Reverse-mode differentiation over a linear tape of tensor operations.

use super::ops::{self, gemm};
use super::{NeuralError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Param,
    Constant,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    AddRowBias(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    SliceCols { src: Var, start: usize },
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Conv2d { input: Var, weight: Var, bias: Var, pad: usize },
    MaxPool2 { input: Var, argmax: Vec<usize> },
    Sum(Var),
    Mean(Var),
    /// A fused scalar loss whose gradient was computed alongside its value.
    ScalarLoss { input: Var, local_grad: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations so their gradients can be replayed in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when no path reached it.
    pub fn take_or_zeros(&mut self, var: Var, like: &[usize]) -> Tensor {
        self.grads[var.0].take().unwrap_or_else(|| Tensor::zeros(like))
    }
}

fn accumulate(slot: &mut Option<Tensor>, grad: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&grad),
        None => *slot = Some(grad),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].needs_grad
    }

    /// A trainable leaf; gradients flow into it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Param, true)
    }

    /// A leaf that never receives a gradient (data, masks, initial states).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), needs))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<(), NeuralError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NeuralError::Shape(format!(
                "{what} {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.check_same(a, b, "add")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.check_same(a, b, "mul")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    /// Elementwise product with a fixed tensor (dropout masks).
    pub fn mul_const(&mut self, a: Var, mask: Tensor) -> Result<Var, NeuralError> {
        if self.value(a).shape() != mask.shape() {
            return Err(NeuralError::Shape(format!(
                "mul_const {:?} vs {:?}",
                self.value(a).shape(),
                mask.shape()
            )));
        }
        let value = self.value(a).zip_map(&mask, |x, m| x * m);
        let needs = self.needs(a);
        Ok(self.push(value, Op::MulConst(a, mask), needs))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        let needs = self.needs(a);
        self.push(value, Op::Scale(a, factor), needs)
    }

    /// Adds a `[cols]` bias to every row of a `[rows, cols]` value.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, NeuralError> {
        let cols = self.value(a).cols();
        if self.value(bias).len() != cols {
            return Err(NeuralError::Shape(format!(
                "bias {:?} for {:?}",
                self.value(bias).shape(),
                self.value(a).shape()
            )));
        }
        let mut value = self.value(a).clone();
        ops::add_row_bias(value.data_mut(), self.value(bias).data());
        let needs = self.needs(a) || self.needs(bias);
        Ok(self.push(value, Op::AddRowBias(a, bias), needs))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(ops::sigmoid);
        let needs = self.needs(a);
        self.push(value, Op::Sigmoid(a), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let needs = self.needs(a);
        self.push(value, Op::Tanh(a), needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let needs = self.needs(a);
        self.push(value, Op::Relu(a), needs)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let needs = self.needs(a);
        self.push(value, Op::Exp(a), needs)
    }

    /// Columns `start..start + width` of a 2-D value.
    pub fn slice_cols(&mut self, src: Var, start: usize, width: usize) -> Result<Var, NeuralError> {
        let v = self.value(src);
        let (rows, cols) = (v.rows(), v.cols());
        if v.shape().len() != 2 || start + width > cols {
            return Err(NeuralError::Shape(format!("slice {start}..{} of {:?}", start + width, v.shape())));
        }
        let mut out = Vec::with_capacity(rows * width);
        for row in v.data().chunks_exact(cols) {
            out.extend_from_slice(&row[start..start + width]);
        }
        let value = Tensor::matrix(rows, width, out)?;
        let needs = self.needs(src);
        Ok(self.push(value, Op::SliceCols { src, start }, needs))
    }

    /// Stacks 2-D values with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NeuralError> {
        let first = parts.first().ok_or_else(|| NeuralError::Shape("concat of nothing".into()))?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() != 2 || v.cols() != cols {
                return Err(NeuralError::Shape(format!("concat_rows part {:?}, want {cols} cols", v.shape())));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        let value = Tensor::matrix(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), needs))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NeuralError> {
        let value = self.value(a).clone().reshape(shape)?;
        let needs = self.needs(a);
        Ok(self.push(value, Op::Reshape(a), needs))
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, pad: usize) -> Result<Var, NeuralError> {
        let value = ops::conv2d(self.value(input), self.value(weight), self.value(bias), pad)?;
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(value, Op::Conv2d { input, weight, bias, pad }, needs))
    }

    pub fn max_pool2(&mut self, input: Var) -> Result<Var, NeuralError> {
        let (value, argmax) = ops::max_pool2(self.value(input))?;
        let needs = self.needs(input);
        Ok(self.push(value, Op::MaxPool2 { input, argmax }, needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let needs = self.needs(a);
        self.push(value, Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = Tensor::scalar(v.sum() / v.len().max(1) as f64);
        let needs = self.needs(a);
        self.push(value, Op::Mean(a), needs)
    }

    /// Records a scalar loss computed outside the tape together with its gradient
    /// with respect to `input`.
    pub fn scalar_loss(&mut self, input: Var, value: f64, local_grad: Tensor) -> Result<Var, NeuralError> {
        if local_grad.shape() != self.value(input).shape() {
            return Err(NeuralError::Shape(format!(
                "loss gradient {:?} for input {:?}",
                local_grad.shape(),
                self.value(input).shape()
            )));
        }
        let needs = self.needs(input);
        Ok(self.push(Tensor::scalar(value), Op::ScalarLoss { input, local_grad }, needs))
    }

    /// Back-propagates from the scalar `output`; gradients of intermediate nodes are
    /// released as soon as they have been propagated, so only leaves keep theirs.
    pub fn backward(&self, output: Var) -> Result<Gradients, NeuralError> {
        if self.value(output).len() != 1 {
            return Err(NeuralError::Shape(format!(
                "backward from non-scalar {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(self.value(output).shape(), 1.0));
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Param | Op::Constant) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<(), NeuralError> {
        let y = &node.value;
        match &node.op {
            Op::Param | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.needs(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, false);
                    accumulate(&mut grads[a.0], Tensor::new(av.shape().to_vec(), da)?);
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, av.data(), true, g.data(), false, &mut db, false);
                    accumulate(&mut grads[b.0], Tensor::new(bv.shape().to_vec(), db)?);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], g.clone());
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::MulConst(a, mask) => accumulate(&mut grads[a.0], g.zip_map(mask, |x, m| x * m)),
            Op::Scale(a, f) => accumulate(&mut grads[a.0], g.map(|x| x * f)),
            Op::AddRowBias(a, bias) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.needs(*bias) {
                    let cols = g.cols();
                    let mut db = vec![0.0; cols];
                    for row in g.data().chunks_exact(cols) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let shape = self.value(*bias).shape().to_vec();
                    accumulate(&mut grads[bias.0], Tensor::new(shape, db)?);
                }
            }
            Op::Sigmoid(a) => accumulate(&mut grads[a.0], g.zip_map(y, |d, s| d * s * (1.0 - s))),
            Op::Tanh(a) => accumulate(&mut grads[a.0], g.zip_map(y, |d, t| d * (1.0 - t * t))),
            Op::Relu(a) => accumulate(&mut grads[a.0], g.zip_map(y, |d, r| if r > 0.0 { d } else { 0.0 })),
            Op::Exp(a) => accumulate(&mut grads[a.0], g.zip_map(y, |d, e| d * e)),
            Op::SliceCols { src, start } => {
                let sv = self.value(*src);
                let (cols, width) = (sv.cols(), g.cols());
                let mut ds = vec![0.0; sv.len()];
                for (dst, src_row) in ds.chunks_exact_mut(cols).zip(g.data().chunks_exact(width)) {
                    dst[*start..*start + width].copy_from_slice(src_row);
                }
                accumulate(&mut grads[src.0], Tensor::new(sv.shape().to_vec(), ds)?);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let n = pv.len();
                    if self.needs(*p) {
                        let part = Tensor::new(pv.shape().to_vec(), g.data()[offset..offset + n].to_vec())?;
                        accumulate(&mut grads[p.0], part);
                    }
                    offset += n;
                }
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                accumulate(&mut grads[a.0], g.clone().reshape(&shape)?);
            }
            Op::Conv2d { input, weight, bias, pad } => {
                let (dx, dw, db) =
                    ops::conv2d_backward(self.value(*input), self.value(*weight), g, *pad, self.needs(*input))?;
                if let Some(dx) = dx {
                    accumulate(&mut grads[input.0], dx);
                }
                if self.needs(*weight) {
                    accumulate(&mut grads[weight.0], dw);
                }
                if self.needs(*bias) {
                    let shape = self.value(*bias).shape().to_vec();
                    accumulate(&mut grads[bias.0], db.reshape(&shape)?);
                }
            }
            Op::MaxPool2 { input, argmax } => {
                let iv = self.value(*input);
                let mut dx = vec![0.0; iv.len()];
                for (&src, &d) in argmax.iter().zip(g.data()) {
                    dx[src] += d;
                }
                accumulate(&mut grads[input.0], Tensor::new(iv.shape().to_vec(), dx)?);
            }
            Op::Sum(a) => {
                let d = g.data()[0];
                accumulate(&mut grads[a.0], Tensor::filled(self.value(*a).shape(), d));
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                let d = g.data()[0] / av.len().max(1) as f64;
                accumulate(&mut grads[a.0], Tensor::filled(av.shape(), d));
            }
            Op::ScalarLoss { input, local_grad } => {
                let d = g.data()[0];
                accumulate(&mut grads[input.0], local_grad.map(|v| v * d));
            }
        }
        Ok(())
    }
}
