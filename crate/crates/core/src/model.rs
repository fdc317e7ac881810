//! Desk-scale classifier architectures, parameter initialization, and the
//! black-box query surface.

use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::defense::DefenseConfig;
use crate::error::Error;
use crate::graph::{Tape, Var};
use crate::optim::{ParamSet, StagedParams, TrainRecipe};
use crate::posterior::{softmax, Posteriors};
use crate::tensor::Tensor;
use crate::Result;

/// Architecture of a target or shadow classifier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModelSpec {
    /// Fully connected ReLU network over vector inputs.
    Mlp { input_dim: usize, hidden: Vec<usize>, num_classes: usize },
    /// Two 3x3 stride-1 convolutions (padding 1) plus one dense layer.
    SmallCnn {
        in_channels: usize,
        height: usize,
        width: usize,
        channels: (usize, usize),
        num_classes: usize,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Mlp { input_dim, hidden, num_classes } => {
                if *num_classes < 2 {
                    return Err(Error::invalid("num_classes must be at least 2"));
                }
                if *input_dim == 0 || hidden.iter().any(|&w| w == 0) {
                    return Err(Error::invalid("layer widths must be positive"));
                }
                Ok(())
            }
            ModelSpec::SmallCnn { in_channels, height, width, channels, num_classes } => {
                if *num_classes < 2 {
                    return Err(Error::invalid("num_classes must be at least 2"));
                }
                if *in_channels == 0
                    || *height == 0
                    || *width == 0
                    || channels.0 == 0
                    || channels.1 == 0
                {
                    return Err(Error::invalid("extents and channel counts must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ModelSpec::Mlp { num_classes, .. } => *num_classes,
            ModelSpec::SmallCnn { num_classes, .. } => *num_classes,
        }
    }

    /// Shape of one input sample.
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            ModelSpec::Mlp { input_dim, .. } => vec![*input_dim],
            ModelSpec::SmallCnn { in_channels, height, width, .. } => {
                vec![*in_channels, *height, *width]
            }
        }
    }

    /// Kaiming-style initialization, deterministic under the given RNG.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamSet {
        fn dense<R: Rng>(params: &mut ParamSet, name: &str, fan_in: usize, out: usize, rng: &mut R) {
            let std = Float::sqrt(2.0 / fan_in as f64);
            let w: Vec<f64> = (0..fan_in * out)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            params.add(format!("{name}.w"), Tensor::new(vec![fan_in, out], w).expect("sized"));
            params.add(format!("{name}.b"), Tensor::zeros(vec![out]));
        }
        let mut params = ParamSet::new();
        match self {
            ModelSpec::Mlp { input_dim, hidden, num_classes } => {
                let mut fan_in = *input_dim;
                for (i, &width) in hidden.iter().enumerate() {
                    dense(&mut params, &format!("fc{i}"), fan_in, width, rng);
                    fan_in = width;
                }
                dense(&mut params, "out", fan_in, *num_classes, rng);
            }
            ModelSpec::SmallCnn { in_channels, height, width, channels, num_classes } => {
                let (c1, c2) = *channels;
                for (name, ci, co) in [("conv1", *in_channels, c1), ("conv2", c1, c2)] {
                    let fan_in = ci * 9;
                    let std = Float::sqrt(2.0 / fan_in as f64);
                    let w: Vec<f64> = (0..co * ci * 9)
                        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    params.add(
                        format!("{name}.w"),
                        Tensor::new(vec![co, ci, 3, 3], w).expect("sized"),
                    );
                    params.add(format!("{name}.b"), Tensor::zeros(vec![co]));
                }
                dense(&mut params, "out", c2 * height * width, *num_classes, rng);
            }
        }
        params
    }

    /// Forward pass from a staged batch to logits.
    pub fn forward(&self, tape: &mut Tape, staged: &StagedParams, x: Var) -> Result<Var> {
        match self {
            ModelSpec::Mlp { hidden, .. } => {
                let mut h = x;
                for layer in 0..hidden.len() {
                    let z = tape.matmul(h, staged.var(2 * layer))?;
                    let z = tape.add_row(z, staged.var(2 * layer + 1))?;
                    h = tape.relu(z);
                }
                let z = tape.matmul(h, staged.var(2 * hidden.len()))?;
                tape.add_row(z, staged.var(2 * hidden.len() + 1))
            }
            ModelSpec::SmallCnn { height, width, channels, num_classes, .. } => {
                let z = tape.conv2d(x, staged.var(0), 1)?;
                let z = tape.add_chan(z, staged.var(1))?;
                let h = tape.relu(z);
                let z = tape.conv2d(h, staged.var(2), 1)?;
                let z = tape.add_chan(z, staged.var(3))?;
                let h = tape.relu(z);
                let batch = tape.value(h).shape()[0];
                let flat = tape.reshape(h, vec![batch, channels.1 * height * width])?;
                let z = tape.matmul(flat, staged.var(4))?;
                let out = tape.add_row(z, staged.var(5))?;
                debug_assert_eq!(tape.value(out).shape()[1], *num_classes);
                Ok(out)
            }
        }
    }
}

/// The attack classifier: three dense layers, 64 and 32 hidden units, 2 outputs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackModelSpec {
    pub input_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl AttackModelSpec {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self { input_dim, epochs: 100, batch_size: 128, lr0: 0.01, momentum: 0.9, seed }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec::Mlp { input_dim: self.input_dim, hidden: vec![64, 32], num_classes: 2 }
    }

    pub fn recipe(&self) -> TrainRecipe {
        TrainRecipe {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            momentum: self.momentum,
            seed: self.seed,
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub loss: f64,
}

/// A classifier after training, immutable and safe to share for queries.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub history: Vec<EpochStats>,
    pub defense: DefenseConfig,
    pub recipe: TrainRecipe,
    pub seed: u64,
}

/// Stack per-sample tensors into one `[batch, ...]` tensor.
pub fn stack_batch(samples: &[&Tensor]) -> Result<Tensor> {
    let first = samples.first().ok_or_else(|| Error::invalid("batch must not be empty"))?;
    let mut shape = vec![samples.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(samples.len() * first.numel());
    for s in samples {
        if s.shape() != first.shape() {
            return Err(Error::ShapeMismatch {
                expected: first.shape().to_vec(),
                got: s.shape().to_vec(),
            });
        }
        data.extend_from_slice(s.data());
    }
    // rank-1 samples stack to [batch, d]; rasters to [batch, c, h, w]
    Tensor::new(shape, data)
}

/// Logits for a batch of samples under fixed parameters (no gradients).
pub fn batch_logits(spec: &ModelSpec, params: &ParamSet, samples: &[&Tensor]) -> Result<Tensor> {
    let batch = stack_batch(samples)?;
    let mut tape = Tape::new();
    let mut staged = Vec::with_capacity(params.len());
    for p in params.iter() {
        staged.push(tape.leaf(p.value.clone(), false));
    }
    let staged = StagedParams::from_vars(staged);
    let x = tape.constant(batch);
    let logits = spec.forward(&mut tape, &staged, x)?;
    Ok(tape.value(logits).clone())
}

impl TrainedModel {
    /// Black-box query: posteriors for one sample.
    pub fn query(&self, sample: &Tensor) -> Result<Posteriors> {
        if sample.shape() != self.spec.input_shape().as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input_shape(),
                got: sample.shape().to_vec(),
            });
        }
        let logits = batch_logits(&self.spec, &self.params, &[sample])?;
        softmax(logits.data())
    }

    pub fn final_train_acc(&self) -> f64 {
        self.history.last().map(|e| e.train_acc).unwrap_or(0.0)
    }

    pub fn final_test_acc(&self) -> f64 {
        self.history.last().map(|e| e.test_acc).unwrap_or(0.0)
    }
}

/// Black-box access to a (possibly defended) model.
pub trait PosteriorOracle {
    fn num_classes(&self) -> usize;
    fn posteriors(&self, x: &Tensor) -> Result<Posteriors>;
    /// Label-only access: predicted class of the sample.
    fn predicted_label(&self, x: &Tensor) -> Result<usize> {
        Ok(self.posteriors(x)?.argmax())
    }
}

impl PosteriorOracle for TrainedModel {
    fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    fn posteriors(&self, x: &Tensor) -> Result<Posteriors> {
        self.query(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::stream_rng;

    #[test]
    fn mlp_forward_shapes() {
        let spec = ModelSpec::Mlp { input_dim: 4, hidden: vec![8, 8], num_classes: 3 };
        let params = spec.init_params(&mut stream_rng(1, 0));
        let x = Tensor::from_vec(vec![0.1, -0.2, 0.3, 0.4]);
        let logits = batch_logits(&spec, &params, &[&x, &x]).unwrap();
        assert_eq!(logits.shape(), &[2, 3]);
    }

    #[test]
    fn cnn_forward_shapes() {
        let spec = ModelSpec::SmallCnn {
            in_channels: 1,
            height: 6,
            width: 6,
            channels: (2, 3),
            num_classes: 2,
        };
        let params = spec.init_params(&mut stream_rng(2, 0));
        let x = Tensor::zeros(vec![1, 6, 6]);
        let logits = batch_logits(&spec, &params, &[&x]).unwrap();
        assert_eq!(logits.shape(), &[1, 2]);
    }

    #[test]
    fn query_is_deterministic_and_valid() {
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![4], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(3, 0));
        let model = TrainedModel {
            spec,
            params,
            history: Vec::new(),
            defense: DefenseConfig::None,
            recipe: TrainRecipe::new(1, 1, 0.1, 0),
            seed: 0,
        };
        let x = Tensor::from_vec(vec![0.5, -0.5, 0.25]);
        let a = model.query(&x).unwrap();
        let b = model.query(&x).unwrap();
        assert_eq!(a, b);
        assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn query_rejects_shape_mismatch() {
        let spec = ModelSpec::Mlp { input_dim: 3, hidden: vec![4], num_classes: 2 };
        let params = spec.init_params(&mut stream_rng(4, 0));
        let model = TrainedModel {
            spec,
            params,
            history: Vec::new(),
            defense: DefenseConfig::None,
            recipe: TrainRecipe::new(1, 1, 0.1, 0),
            seed: 0,
        };
        let x = Tensor::from_vec(vec![0.5, -0.5]);
        assert!(matches!(model.query(&x), Err(Error::ShapeMismatch { .. })));
    }
}
