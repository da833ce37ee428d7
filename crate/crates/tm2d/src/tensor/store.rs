//! Named parameter storage shared by models, the optimizer, and checkpoints.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Ordered, named collection of learnable tensors. Models hold [`ParamId`]s
/// into one store; the Adam state and checkpoint records align to the same
/// order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Replace a tensor wholesale (checkpoint restore). Shape must match.
    pub fn restore(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let id = self
            .by_name(name)
            .ok_or_else(|| Error::Version(format!("checkpoint has unknown parameter {name}")))?;
        if self.tensors[id.0].shape() != tensor.shape() {
            return Err(Error::Version(format!(
                "checkpoint parameter {name} has shape {:?}, expected {:?}",
                tensor.shape(),
                self.tensors[id.0].shape()
            )));
        }
        self.tensors[id.0] = tensor;
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

/// Per-step binding of store parameters into a graph. Collects which graph
/// variable each parameter was bound to, so gradients can be read back.
#[derive(Debug)]
pub struct Binding {
    vars: Vec<Option<Var>>,
}

impl Binding {
    /// Bind every parameter in the store into the graph as a trainable input.
    pub fn all(graph: &mut Graph, store: &ParamStore) -> Self {
        let vars = store
            .tensors
            .iter()
            .map(|t| Some(graph.input(t.clone(), true)))
            .collect();
        Binding { vars }
    }

    /// Bind from an external tensor list aligned to the store order
    /// (used by gradient checks that perturb parameters).
    pub fn from_tensors(graph: &mut Graph, tensors: &[Tensor]) -> Self {
        let vars = tensors
            .iter()
            .map(|t| Some(graph.input(t.clone(), true)))
            .collect();
        Binding { vars }
    }

    /// Bind from variables already inserted into the graph, aligned to the
    /// store order.
    pub fn from_vars(vars: &[Var]) -> Self {
        Binding {
            vars: vars.iter().map(|&v| Some(v)).collect(),
        }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0].expect("parameter not bound")
    }

    /// Gradient of each bound parameter after backward, aligned to store order.
    pub fn grads<'g>(&self, graph: &'g Graph) -> Vec<Option<&'g Tensor>> {
        self.vars
            .iter()
            .map(|v| v.and_then(|var| graph.grad(var)))
            .collect()
    }
}
