//! Forward and backward passes for every layer type in the hashing network.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward};
pub use batchnorm::{BatchNormLayer, BatchNormRecord, BatchStats, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use conv::{default_padding, output_extent, ConvKind, ConvLayer, ConvRecord};
pub use dense::{DenseLayer, DenseRecord};
pub use loss::softmax_cross_entropy;
pub use pool::{avgpool_global_backward, avgpool_global_forward};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Uniform initialization in `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`.
pub fn init_uniform<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Result<Tensor> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    BatchNorm(BatchNormLayer),
    Relu,
    AvgPool,
    Dense(DenseLayer),
    Sigmoid,
}

/// Values cached by a training-mode forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub enum ActivationRecord {
    Conv(ConvRecord),
    BatchNorm(BatchNormRecord),
    Relu { input: Tensor },
    AvgPool { input_shape: Vec<usize> },
    Dense(DenseRecord),
    Sigmoid { output: Tensor },
}

impl Layer {
    pub fn name(&self) -> String {
        match self {
            Layer::Conv(c) => format!(
                "{} {}x{}x{}x{} s{}",
                c.kind().name(),
                c.kernel(),
                c.kernel(),
                c.in_channels(),
                c.out_channels(),
                c.stride()
            ),
            Layer::BatchNorm(b) => format!("batchnorm {}", b.channels()),
            Layer::Relu => "relu".into(),
            Layer::AvgPool => "avgpool".into(),
            Layer::Dense(d) => format!("dense {}x{}", d.in_dim(), d.out_dim()),
            Layer::Sigmoid => "sigmoid".into(),
        }
    }

    pub fn forward_infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv(c) => c.forward(x),
            Layer::BatchNorm(b) => b.forward_infer(x),
            Layer::Relu => Ok(relu_forward(x)),
            Layer::AvgPool => avgpool_global_forward(x),
            Layer::Dense(d) => d.forward(x),
            Layer::Sigmoid => Ok(sigmoid_forward(x)),
        }
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, ActivationRecord, Option<BatchStats>)> {
        Ok(match self {
            Layer::Conv(c) => {
                let (y, r) = c.forward_train(x)?;
                (y, ActivationRecord::Conv(r), None)
            }
            Layer::BatchNorm(b) => {
                let (y, r, s) = b.forward_train(x)?;
                (y, ActivationRecord::BatchNorm(r), Some(s))
            }
            Layer::Relu => (relu_forward(x), ActivationRecord::Relu { input: x.clone() }, None),
            Layer::AvgPool => (
                avgpool_global_forward(x)?,
                ActivationRecord::AvgPool {
                    input_shape: x.shape().to_vec(),
                },
                None,
            ),
            Layer::Dense(d) => {
                let (y, r) = d.forward_train(x)?;
                (y, ActivationRecord::Dense(r), None)
            }
            Layer::Sigmoid => {
                let y = sigmoid_forward(x);
                (y.clone(), ActivationRecord::Sigmoid { output: y }, None)
            }
        })
    }

    /// Returns the input gradient and parameter gradients ordered as [`Layer::params`].
    pub fn backward(&self, record: Option<&ActivationRecord>, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let missing = || Error::MissingRecord(self.kind_name());
        let record = record.ok_or_else(missing)?;
        match (self, record) {
            (Layer::Conv(c), ActivationRecord::Conv(r)) => {
                let (gx, gw) = c.backward(r, grad_out)?;
                Ok((gx, vec![gw]))
            }
            (Layer::BatchNorm(b), ActivationRecord::BatchNorm(r)) => {
                let (gx, gg, gb) = b.backward(r, grad_out)?;
                Ok((gx, vec![gg, gb]))
            }
            (Layer::Relu, ActivationRecord::Relu { input }) => Ok((relu_backward(input, grad_out)?, vec![])),
            (Layer::AvgPool, ActivationRecord::AvgPool { input_shape }) => {
                Ok((avgpool_global_backward(input_shape, grad_out)?, vec![]))
            }
            (Layer::Dense(d), ActivationRecord::Dense(r)) => {
                let (gx, gw, gb) = d.backward(r, grad_out)?;
                Ok((gx, vec![gw, gb]))
            }
            (Layer::Sigmoid, ActivationRecord::Sigmoid { output }) => {
                Ok((sigmoid_backward(output, grad_out)?, vec![]))
            }
            _ => Err(missing()),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::AvgPool => "avgpool",
            Layer::Dense(_) => "dense",
            Layer::Sigmoid => "sigmoid",
        }
    }

    /// Trainable parameters.
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv(c) => vec![c.weights()],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv(c) => vec![c.weights_mut()],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => vec![],
        }
    }

    /// Everything persisted in a checkpoint: parameters plus running statistics.
    pub fn state(&self) -> Vec<&Tensor> {
        match self {
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta, &b.running_mean, &b.running_var],
            other => other.params(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta, &mut b.running_mean, &mut b.running_var],
            other => other.params_mut(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_without_record_is_an_error() {
        let g = Tensor::zeros(&[1, 2]).unwrap();
        assert!(matches!(Layer::Relu.backward(None, &g), Err(Error::MissingRecord("relu"))));
        let wrong = ActivationRecord::AvgPool { input_shape: vec![1, 2, 1, 1] };
        assert!(Layer::Sigmoid.backward(Some(&wrong), &g).is_err());
    }

    #[test]
    fn init_bounds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let t = init_uniform(&[64, 6], 6, &mut rng).unwrap();
        assert!(t.max_abs() <= 1.0);
        assert!(t.max_abs() > 0.5);
    }
}
