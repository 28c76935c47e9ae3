use std::path::Path;

use rand::Rng;

use super::mdn::{self, MixtureParams};
use super::{GeneratorConfig, GeneratorError};
use crate::ink::Class;
use crate::neural::ops::{gemm, sigmoid};
use crate::neural::rng::derive_seed;
use crate::neural::{dropout_mask, glorot_init, zero_bias, Checkpoint, ParamStore, Tape, Tensor, Var};

/// Stacked-LSTM mixture density network for one class.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorModel {
    pub config: GeneratorConfig,
    pub label: Class,
    /// Task the training series came from; carried into sampled provenance.
    pub task_id: u8,
    pub params: ParamStore,
}

/// Per-layer recurrent state used while sampling.
#[derive(Clone, Debug)]
pub struct LstmState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl GeneratorModel {
    /// Fresh model with Glorot-normal weights and zero biases.
    pub fn init(config: GeneratorConfig, label: Class, task_id: u8) -> Result<Self, GeneratorError> {
        config.validate()?;
        let (h, m) = (config.hidden_size, config.n_mixtures);
        let mut params = ParamStore::new();
        for l in 0..config.n_layers {
            let input = if l == 0 { 2 } else { h };
            let seed = |part: &str| derive_seed(config.seed, &format!("init/lstm{l}.{part}"));
            params.push(format!("lstm{l}.wx"), glorot_init(&[input, 4 * h], seed("wx"))?);
            params.push(format!("lstm{l}.wh"), glorot_init(&[h, 4 * h], seed("wh"))?);
            params.push(format!("lstm{l}.b"), zero_bias(4 * h));
        }
        params.push("head.w", glorot_init(&[h, 6 * m], derive_seed(config.seed, "init/head.w"))?);
        params.push("head.b", zero_bias(6 * m));
        Ok(Self { config, label, task_id, params })
    }

    fn layer(&self, l: usize) -> (&Tensor, &Tensor, &Tensor) {
        let t = self.params.tensors();
        (&t[3 * l], &t[3 * l + 1], &t[3 * l + 2])
    }

    fn head(&self) -> (&Tensor, &Tensor) {
        let t = self.params.tensors();
        let n = t.len();
        (&t[n - 2], &t[n - 1])
    }

    /// Records one LSTM step on the tape. Gate column order is input, forget, cell, output.
    fn tape_cell(tape: &mut Tape, p: &[Var], x: Var, h: Var, c: Var, hidden: usize) -> Result<(Var, Var), GeneratorError> {
        let xi = tape.matmul(x, p[0])?;
        let hh = tape.matmul(h, p[1])?;
        let pre = tape.add(xi, hh)?;
        let gates = tape.add_row_bias(pre, p[2])?;
        let i = tape.slice_cols(gates, 0, hidden)?;
        let f = tape.slice_cols(gates, hidden, hidden)?;
        let g = tape.slice_cols(gates, 2 * hidden, hidden)?;
        let o = tape.slice_cols(gates, 3 * hidden, hidden)?;
        let (i, f, g, o) = (tape.sigmoid(i), tape.sigmoid(f), tape.tanh(g), tape.sigmoid(o));
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let squashed = tape.tanh(c_next);
        let h_next = tape.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// One LSTM cell step on the tape; exposed for gradient checking.
    pub fn lstm_cell_on_tape(tape: &mut Tape, weights: [Var; 3], x: Var, h: Var, c: Var) -> Result<(Var, Var), GeneratorError> {
        let hidden = tape.value(h).cols();
        Self::tape_cell(tape, &weights, x, h, c, hidden)
    }

    /// Teacher-forced mean NLL over a batch of equal-length windows. The input at
    /// step `t` is the point at `t - 1` (the origin at `t = 0`). Dropout is applied
    /// between stacked layers when `dropout_rng` is given.
    pub fn teacher_forced_loss<R: Rng>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        windows: &[&[(f64, f64)]],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<Var, GeneratorError> {
        let batch = windows.len();
        let steps = windows.first().map_or(0, |w| w.len());
        if batch == 0 || steps == 0 || windows.iter().any(|w| w.len() != steps) {
            return Err(GeneratorError::Shape("teacher forcing needs equal-length, non-empty windows".into()));
        }
        let (hidden, layers) = (self.config.hidden_size, self.config.n_layers);
        let mut h: Vec<Var> = (0..layers).map(|_| tape.constant(Tensor::zeros(&[batch, hidden]))).collect();
        let mut c: Vec<Var> = h.clone();
        let mut tops = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(2 * batch * steps);
        for t in 0..steps {
            let mut input = Vec::with_capacity(2 * batch);
            for w in windows {
                let (px, py) = if t == 0 { (0.0, 0.0) } else { w[t - 1] };
                input.extend([px, py]);
                targets.extend([w[t].0, w[t].1]);
            }
            let mut x = tape.constant(Tensor::matrix(batch, 2, input)?);
            for l in 0..layers {
                let (hn, cn) = Self::tape_cell(tape, &vars[3 * l..3 * l + 3], x, h[l], c[l], hidden)?;
                h[l] = hn;
                c[l] = cn;
                x = hn;
                if l + 1 < layers {
                    if let Some(rng) = dropout_rng.as_deref_mut() {
                        let mask = dropout_mask(&[batch, hidden], self.config.dropout_keep, rng)?;
                        x = tape.mul_const(hn, mask)?;
                    }
                }
            }
            tops.push(x);
        }
        let stacked = tape.concat_rows(&tops)?;
        let n = vars.len();
        let proj = tape.matmul(stacked, vars[n - 2])?;
        let raw = tape.add_row_bias(proj, vars[n - 1])?;
        let (loss, grad) = mdn::nll_rows(tape.value(raw).data(), &targets, self.config.n_mixtures)?;
        let shape = tape.value(raw).shape().to_vec();
        Ok(tape.scalar_loss(raw, loss, Tensor::new(shape, grad)?)?)
    }

    /// Mean teacher-forced NLL without dropout or gradients.
    pub fn evaluate_loss(&self, windows: &[&[(f64, f64)]]) -> Result<f64, GeneratorError> {
        let mut tape = Tape::new();
        let vars = self.params.attach(&mut tape);
        let loss = self.teacher_forced_loss::<crate::neural::rng::ComponentRng>(&mut tape, &vars, windows, None)?;
        Ok(tape.value(loss).data()[0])
    }

    pub fn zero_state(&self) -> LstmState {
        let zeros = vec![vec![0.0; self.config.hidden_size]; self.config.n_layers];
        LstmState { h: zeros.clone(), c: zeros }
    }

    /// Advances the recurrent state by one input point and returns the raw head row.
    pub fn step(&self, state: &mut LstmState, input: (f64, f64)) -> Vec<f64> {
        let hidden = self.config.hidden_size;
        let mut x = vec![input.0, input.1];
        let mut gates = vec![0.0; 4 * hidden];
        for l in 0..self.config.n_layers {
            let (wx, wh, b) = self.layer(l);
            gemm(1, x.len(), 4 * hidden, &x, false, wx.data(), false, &mut gates, false);
            gemm(1, hidden, 4 * hidden, &state.h[l], false, wh.data(), false, &mut gates, true);
            for (g, bias) in gates.iter_mut().zip(b.data()) {
                *g += bias;
            }
            let (h, c) = (&mut state.h[l], &mut state.c[l]);
            for j in 0..hidden {
                let i = sigmoid(gates[j]);
                let f = sigmoid(gates[hidden + j]);
                let g = gates[2 * hidden + j].tanh();
                let o = sigmoid(gates[3 * hidden + j]);
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            x.clone_from(h);
        }
        let (w, b) = self.head();
        let mut raw = b.data().to_vec();
        gemm(1, hidden, raw.len(), &x, false, w.data(), false, &mut raw, true);
        raw
    }

    pub fn step_mixture(&self, state: &mut LstmState, input: (f64, f64)) -> Result<MixtureParams, GeneratorError> {
        mdn::mdn_params(&self.step(state, input), self.config.n_mixtures)
    }

    fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "generator",
            "class": self.label,
            "task_id": self.task_id,
            "config": self.config,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.params.to_checkpoint(self.meta())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, GeneratorError> {
        let bad = |what: &str| GeneratorError::Checkpoint(format!("generator checkpoint lacks {what}"));
        let config: GeneratorConfig =
            serde_json::from_value(ckpt.meta.get("config").cloned().ok_or_else(|| bad("config"))?)
                .map_err(|e| GeneratorError::Checkpoint(e.to_string()))?;
        let label: Class = serde_json::from_value(ckpt.meta.get("class").cloned().ok_or_else(|| bad("class"))?)
            .map_err(|e| GeneratorError::Checkpoint(e.to_string()))?;
        let task_id = ckpt.meta.get("task_id").and_then(|v| v.as_u64()).ok_or_else(|| bad("task_id"))? as u8;
        let template = Self::init(config.clone(), label, task_id)?;
        let params = ParamStore::from_checkpoint(ckpt, &template.params)?;
        Ok(Self { config, label, task_id, params })
    }

    pub fn save(&self, path: &Path) -> Result<(), GeneratorError> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, GeneratorError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
