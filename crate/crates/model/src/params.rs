use std::collections::HashMap;

use vfd_tensor::{Float, Tensor};

/// Named trainable tensors in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
    decay: Vec<bool>,
    index: HashMap<String, usize>,
}

impl<T: Float> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            decay: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor; `decay` marks it as subject to weight decay.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, decay: bool) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        self.decay.push(decay);
        id
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|i| &self.values[i])
    }

    pub fn value(&self, id: usize) -> &Tensor<T> {
        &self.values[id]
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Tensor<T> {
        &mut self.values[id]
    }

    pub fn decays(&self, id: usize) -> bool {
        self.decay[id]
    }

    pub fn values(&self) -> &[Tensor<T>] {
        &self.values
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }
}
