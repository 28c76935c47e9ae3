use super::checkpoint::Checkpoint;
use super::{NeuralError, Tape, Tensor, Var};

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.names.push(name.into());
        self.tensors.push(tensor);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every parameter on `tape`, in store order.
    pub fn attach(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }

    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            tensors: self.names.iter().cloned().zip(self.tensors.iter().cloned()).collect(),
            meta,
        }
    }

    /// Rebuilds a store from a checkpoint, checking names and shapes against `template`.
    pub fn from_checkpoint(ckpt: &Checkpoint, template: &ParamStore) -> Result<Self, NeuralError> {
        if ckpt.tensors.len() != template.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} tensors, found {}",
                template.len(),
                ckpt.tensors.len()
            )));
        }
        let mut out = ParamStore::new();
        for ((name, t), (want_name, want)) in ckpt.tensors.iter().zip(template.names.iter().zip(&template.tensors)) {
            if name != want_name || t.shape() != want.shape() {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor {name} {:?} does not match {want_name} {:?}",
                    t.shape(),
                    want.shape()
                )));
            }
            out.push(name.clone(), t.clone());
        }
        Ok(out)
    }
}
