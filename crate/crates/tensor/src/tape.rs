use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::kernels::Geom;
use crate::{Float, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<T> {
    Leaf,
    Conv2d { x: usize, w: usize, k: usize, geom: Geom },
    Depthwise { x: usize, w: usize, geom: Geom },
    BatchNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<T>, inv_std: Vec<T>, training: bool },
    Relu { x: usize },
    MaxPool { x: usize, geom: Geom, arg: Vec<usize> },
    GlobalAvgPool { x: usize },
    Linear { x: usize, w: usize, b: usize },
    Concat { xs: Vec<usize> },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Neg { x: usize },
    Abs { x: usize },
    Scale { x: usize, c: T },
    WeightedSum { xs: Vec<(usize, T)> },
    SoftThreshold { x: usize, t: usize },
    Sum { x: usize },
    CrossEntropy { scores: usize, labels: Vec<usize>, probs: Vec<T> },
}

pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// Linear record of one forward pass.
pub struct Tape<T> {
    pub(crate) nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Float> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of every `requires_grad` leaf, keyed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    map: HashMap<usize, Tensor<T>>,
}

impl<T: Float> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.map.get(&v.0)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.map.remove(&v.0)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drop every record so the tape can host the next step.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Reverse sweep from a scalar `loss`. A tape can be swept once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes.is_empty() {
            return Err(TensorError::EmptyTape);
        }
        if self.consumed {
            return Err(TensorError::BackwardAlreadyRun);
        }
        let loss_val = &self.nodes[loss.0].value;
        if loss_val.numel() != 1 {
            return Err(TensorError::NonScalarLoss(loss_val.shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut out = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                out.insert(i, Tensor::zeros(node.value.shape()));
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                let shape = node.value.shape().to_vec();
                out.insert(idx, Tensor::from_vec(shape, g)?);
                continue;
            }
            for (input, contrib) in self.local_backward(idx, &g) {
                if !self.nodes[input].requires_grad {
                    continue;
                }
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += *c),
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Ok(Gradients { map: out })
    }
}
