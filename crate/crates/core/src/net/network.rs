use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{LayerKind, NetworkConfig};
use crate::error::{Error, Result};
use crate::layers::{ActivationRecord, BatchNormLayer, BatchStats, ConvLayer, DenseLayer, Layer};
use crate::tensor::Tensor;

/// An instantiated hashing network: convolution blocks, global pooling
/// (the `pool6` tap), the sigmoid latent layer and the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
    pool_index: usize,
    latent_index: usize,
    step: u64,
}

/// Inference outputs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub pool: Tensor,
    /// Sigmoid activations `[batch, bits]`.
    pub latent: Tensor,
    pub logits: Tensor,
}

/// A training-mode forward pass: outputs plus everything backward needs.
#[derive(Debug, Clone)]
pub struct TrainPass {
    pub latent: Tensor,
    pub logits: Tensor,
    records: Vec<ActivationRecord>,
    stats: Vec<Option<BatchStats>>,
}

/// Parameter gradients, one list per layer aligned with [`Layer::params`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_layer: Vec<Vec<Tensor>>,
    pub input: Tensor,
}

impl Network {
    /// Builds the network with parameters drawn from `seed`.
    pub fn build(config: &NetworkConfig, seed: u64) -> Result<Network> {
        let plan = config.plan()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(plan.len());
        let mut pool_index = 0;
        let mut latent_index = 0;
        for p in &plan {
            let (m, n) = (p.input.channels, p.output.channels);
            let layer = match p.kind {
                LayerKind::ConvStandard => Layer::Conv(ConvLayer::standard(m, n, p.kernel, p.stride, &mut rng)?),
                LayerKind::ConvDw => Layer::Conv(ConvLayer::depthwise(m, p.kernel, p.stride, &mut rng)?),
                LayerKind::ConvPw => {
                    let mut pw = ConvLayer::pointwise(m, n, &mut rng)?;
                    if p.stride != 1 {
                        pw = ConvLayer::from_weights(pw.kind(), pw.weights().clone(), p.stride, 0)?;
                    }
                    Layer::Conv(pw)
                }
                LayerKind::BatchNorm => Layer::BatchNorm(BatchNormLayer::new(n)?),
                LayerKind::Relu => Layer::Relu,
                LayerKind::AvgPoolGlobal => {
                    pool_index = layers.len();
                    Layer::AvgPool
                }
                LayerKind::Dense => Layer::Dense(DenseLayer::init(p.input.numel(), n, &mut rng)?),
                LayerKind::Sigmoid => {
                    latent_index = layers.len();
                    Layer::Sigmoid
                }
                // the loss applies softmax
                LayerKind::Softmax => continue,
            };
            layers.push(layer);
        }
        Ok(Network {
            config: config.clone(),
            layers,
            pool_index,
            latent_index,
            step: 0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn bits(&self) -> usize {
        self.config.bits
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    /// Completed training steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let e = self.config.input;
        let ok = matches!(x.shape(), &[_, c, h, w] if c == e.channels && h == e.height && w == e.width);
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "network input",
                left: x.shape().to_vec(),
                right: vec![x.shape()[0], e.channels, e.height, e.width],
            });
        }
        Ok(())
    }

    /// Inference-mode forward pass (batchnorm uses running statistics).
    pub fn forward(&self, x: &Tensor) -> Result<Forward> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut pool = None;
        let mut latent = None;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward_infer(&cur)?;
            if i == self.pool_index {
                pool = Some(cur.clone());
            }
            if i == self.latent_index {
                latent = Some(cur.clone());
            }
        }
        Ok(Forward {
            pool: pool.expect("pool layer present"),
            latent: latent.expect("latent layer present"),
            logits: cur,
        })
    }

    /// Latent sigmoid activations `[batch, bits]`, stopping at the latent layer.
    pub fn latent(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers[..=self.latent_index] {
            cur = layer.forward_infer(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<TrainPass> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut records = Vec::with_capacity(self.layers.len());
        let mut stats = Vec::with_capacity(self.layers.len());
        let mut latent = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, rec, st) = layer.forward_train(&cur)?;
            records.push(rec);
            stats.push(st);
            if i == self.latent_index {
                latent = Some(y.clone());
            }
            cur = y;
        }
        Ok(TrainPass {
            latent: latent.expect("latent layer present"),
            logits: cur,
            records,
            stats,
        })
    }

    pub fn backward(&self, pass: &TrainPass, grad_logits: &Tensor) -> Result<Gradients> {
        let mut grad = grad_logits.clone();
        let mut per_layer = vec![Vec::new(); self.layers.len()];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gx, gp) = layer.backward(pass.records.get(i), &grad)?;
            per_layer[i] = gp;
            grad = gx;
        }
        Ok(Gradients { per_layer, input: grad })
    }

    /// Folds the batch statistics of a training pass into the running averages.
    pub fn update_running_stats(&mut self, pass: &TrainPass) {
        for (layer, st) in self.layers.iter_mut().zip(&pass.stats) {
            if let (Layer::BatchNorm(bn), Some(st)) = (layer, st) {
                bn.update_running(st);
            }
        }
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|t| t.len())
            .sum()
    }

    /// Rounds every stored tensor to `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for layer in &mut self.layers {
            for t in layer.state_mut() {
                t.round_to_f32();
            }
        }
    }
}
