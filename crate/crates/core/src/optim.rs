//! Parameter storage and SGD with momentum and cosine annealing.

use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::Error;
use crate::graph::{Tape, Var};
use crate::tensor::Tensor;
use crate::Result;

/// One named parameter with its gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named parameter tensors, each paired with a gradient tensor of the same shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

/// Handles to the tape leaves created by [`ParamSet::stage`], in parameter order.
pub struct StagedParams(Vec<Var>);

impl StagedParams {
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self(vars)
    }

    pub fn var(&self, i: usize) -> Var {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) {
        let grad = Tensor::zeros(value.shape().to_vec());
        self.params.push(Param { name: name.into(), value, grad });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn get(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param {
        &mut self.params[i]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Insert every parameter value as a gradient-tracked leaf on `tape`.
    pub fn stage(&self, tape: &mut Tape) -> StagedParams {
        StagedParams(self.params.iter().map(|p| tape.leaf(p.value.clone(), true)).collect())
    }

    /// Insert every parameter as a constant leaf (no gradients flow into them).
    pub fn stage_frozen(&self, tape: &mut Tape) -> StagedParams {
        StagedParams(self.params.iter().map(|p| tape.constant(p.value.clone())).collect())
    }

    /// Accumulate the staged leaves' gradients back into the gradient slots.
    pub fn absorb_grads(&mut self, tape: &Tape, staged: &StagedParams) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(&staged.0) {
            let g = tape.grad(v)?;
            for (dst, src) in p.grad.data_mut().iter_mut().zip(g.data()) {
                *dst += src;
            }
        }
        Ok(())
    }

    /// Overwrite gradients with externally computed ones (one tensor per parameter).
    pub fn set_grads(&mut self, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::invalid("gradient count does not match parameter count"));
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            if g.shape() != p.value.shape() {
                return Err(Error::ShapeMismatch {
                    expected: p.value.shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
            p.grad = g.clone();
        }
        Ok(())
    }

    /// Snapshot the gradient slots, in parameter order.
    pub fn grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.grad.clone()).collect()
    }
}

/// Cosine-annealed learning rate: `lr0 * (1 + cos(pi * epoch / total)) / 2`.
pub fn cosine_lr(epoch: usize, total: usize, lr0: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("total epochs must be at least 1"));
    }
    if epoch > total {
        return Err(Error::invalid("epoch exceeds total"));
    }
    Ok(lr0 * 0.5 * (1.0 + Float::cos(core::f64::consts::PI * epoch as f64 / total as f64)))
}

/// How a model is trained: epochs, batch size, initial LR, momentum, seed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainRecipe {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl TrainRecipe {
    pub fn new(epochs: usize, batch_size: usize, lr0: f64, seed: u64) -> Self {
        Self { epochs, batch_size, lr0, momentum: 0.9, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.lr0 <= 0.0 {
            return Err(Error::invalid("lr0 must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// SGD with classic velocity accumulation: `v <- mu v + g`, `w <- w - lr v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Self { momentum, velocity: Vec::new() }
    }

    /// Apply one update and zero the gradients afterwards.
    pub fn step(&mut self, params: &mut ParamSet, lr: f64) -> Result<()> {
        if lr <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.velocity.is_empty() {
            self.velocity =
                params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::invalid("optimizer state does not match parameter count"));
        }
        for (i, v) in self.velocity.iter_mut().enumerate() {
            let p = params.get_mut(i);
            for ((vi, wi), gi) in
                v.data_mut().iter_mut().zip(p.value.data_mut()).zip(p.grad.data())
            {
                *vi = self.momentum * *vi + gi;
                *wi -= lr * *vi;
            }
        }
        params.zero_grads();
        Ok(())
    }
}
