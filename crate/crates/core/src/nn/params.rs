use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    /// L2 penalty coefficient added to this tensor's gradient before each
    /// optimizer step.
    pub l2: f64,
}

/// Ordered, named collection of trainable tensors owned by one party.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

/// Graph handles for every tensor of a store, in store order.
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Handles for a store's tensors recorded by the caller, in store order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, l2: f64) -> ParamId {
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
            l2,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|e| &e.value)
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Records every tensor as a gradient-tracked leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound(self.tensors().map(|t| g.param(t.clone())).collect())
    }

    /// Records every tensor as a constant leaf.
    pub fn bind_frozen(&self, g: &mut Graph) -> Bound {
        Bound(self.tensors().map(|t| g.constant(t.clone())).collect())
    }

    /// Gradients of a bound store after backward, zeros where untouched.
    pub fn grads(&self, g: &Graph, bound: &Bound) -> Vec<Tensor> {
        bound.0.iter().map(|&v| g.grad_or_zeros(v)).collect()
    }

    /// Replaces all values from `tensors`, which must match names' shapes.
    pub fn load_values(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.entries.len() {
            return Err(Error::CheckpointMismatch {
                name: "parameter count".into(),
                expected: vec![self.entries.len()],
                found: vec![tensors.len()],
            });
        }
        for (entry, t) in self.entries.iter().zip(&tensors) {
            if entry.value.dims() != t.dims() {
                return Err(Error::CheckpointMismatch {
                    name: entry.name.clone(),
                    expected: entry.value.dims().to_vec(),
                    found: t.dims().to_vec(),
                });
            }
        }
        for (entry, t) in self.entries.iter_mut().zip(tensors) {
            entry.value = t;
        }
        Ok(())
    }

    /// Copies values from another store with the same layout.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if a.name != b.name {
                return Err(Error::CheckpointMismatch {
                    name: format!("{} (found `{}`)", a.name, b.name),
                    expected: a.value.dims().to_vec(),
                    found: b.value.dims().to_vec(),
                });
            }
        }
        self.load_values(other.tensors().cloned().collect())
    }
}
