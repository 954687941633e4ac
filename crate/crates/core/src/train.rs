//! Mini-batch SGD with a step learning-rate schedule.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::softmax_cross_entropy;
use crate::net::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplier applied every `decay_interval` iterations, in `(0, 1]`.
    pub decay_factor: f64,
    pub decay_interval: u64,
    pub max_iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// Iterations per log line.
    pub log_every: u64,
    /// Heavy-ball momentum; 0 is plain SGD.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            decay_factor: 0.1,
            decay_interval: 10_000,
            max_iterations: 30_000,
            batch_size: 32,
            seed: 0,
            log_every: 100,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    /// Desk-scale schedule for the `toy` network on the synthetic dataset.
    pub fn toy() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            decay_factor: 0.1,
            decay_interval: 1_500,
            max_iterations: 2_000,
            batch_size: 32,
            seed: 0,
            log_every: 100,
            momentum: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.decay_interval == 0 || self.batch_size == 0 || self.log_every == 0 {
            return bad("decay interval, batch size and log interval must be positive".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        Ok(())
    }
}

/// `learning_rate * decay_factor ^ floor(iteration / decay_interval)`.
pub fn lr_at(config: &TrainConfig, iteration: u64) -> f64 {
    let drops = (iteration / config.decay_interval) as i32;
    config.learning_rate * config.decay_factor.powi(drops)
}

/// Forward, mean cross-entropy, backward, gradients and batch statistics.
fn compute_step(net: &Network, images: &Tensor, labels: &[usize]) -> Result<(f64, crate::net::TrainPass, Vec<Vec<Tensor>>)> {
    for &label in labels {
        if label >= net.classes() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: net.classes(),
            });
        }
    }
    let pass = net.forward_train(images)?;
    let (loss, grad) = softmax_cross_entropy(&pass.logits, labels)?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration: net.step(),
            loss,
        });
    }
    let grads = net.backward(&pass, &grad)?;
    Ok((loss, pass, grads.per_layer))
}

/// One plain SGD update `p <- p - lr * grad`; returns the batch loss.
/// Increments the network's step counter.
pub fn sgd_step(net: &mut Network, images: &Tensor, labels: &[usize], lr: f64) -> Result<f64> {
    let (loss, pass, grads) = compute_step(net, images, labels)?;
    for (layer, g) in net.layers_mut().iter_mut().zip(&grads) {
        for (p, g) in layer.params_mut().into_iter().zip(g) {
            p.axpy(-lr, g)?;
        }
    }
    finish_step(net, &pass, loss)
}

/// Applies batch statistics and advances the step counter, or reports
/// divergence if the update left any parameter non-finite.
fn finish_step(net: &mut Network, pass: &crate::net::TrainPass, loss: f64) -> Result<f64> {
    if net.layers().iter().flat_map(|l| l.params()).any(|p| !p.is_finite()) {
        return Err(Error::Divergence {
            iteration: net.step(),
            loss,
        });
    }
    net.update_running_stats(pass);
    net.set_step(net.step() + 1);
    Ok(loss)
}

/// SGD with optional momentum: `v <- mu v + g`, `p <- p - lr v`.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    momentum: f64,
    velocity: Vec<Vec<Tensor>>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd {
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Network, images: &Tensor, labels: &[usize], lr: f64) -> Result<f64> {
        if self.momentum == 0.0 {
            return sgd_step(net, images, labels, lr);
        }
        let (loss, pass, grads) = compute_step(net, images, labels)?;
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| g.iter().map(Tensor::zeros_like).collect()).collect();
        }
        for ((layer, g), v) in net.layers_mut().iter_mut().zip(&grads).zip(&mut self.velocity) {
            for ((p, g), v) in layer.params_mut().into_iter().zip(g).zip(v) {
                *v = v.mul_scalar(self.momentum).add(g)?;
                p.axpy(-lr, v)?;
            }
        }
        finish_step(net, &pass, loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    /// Iterations completed when the line was written.
    pub iteration: u64,
    /// Rate used by the last iteration of the window.
    pub learning_rate: f64,
    /// Mean batch loss over the window.
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
    /// Loss of the first batch, before any update.
    pub initial_loss: Option<f64>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.entries.last().map(|e| e.mean_loss)
    }

    /// One `iteration lr mean_loss` line per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{} {:e} {:.6}", e.iteration, e.learning_rate, e.mean_loss);
        }
        s
    }
}

/// Trains `net` in place for `config.max_iterations` mini-batches.
///
/// Each epoch visits the dataset in a fresh seeded permutation; a batch that
/// runs past the end of an epoch continues into the next permutation, so
/// every batch is full. The schedule is evaluated at the network's own step
/// counter, so training resumed from a checkpoint continues the schedule.
pub fn train(net: &mut Network, dataset: &Dataset, config: &TrainConfig) -> Result<TrainLog> {
    train_with(net, dataset, config, |_| {})
}

/// [`train`] with a callback for each log entry as it is written.
pub fn train_with(
    net: &mut Network,
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_log: impl FnMut(&LogEntry),
) -> Result<TrainLog> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let input = net.config().input;
    let (h, w) = dataset.image_size();
    if (h, w) != (input.height, input.width) || input.channels != 3 {
        return Err(Error::ShapeMismatch {
            op: "dataset vs network input",
            left: vec![3, h, w],
            right: vec![input.channels, input.height, input.width],
        });
    }
    if dataset.classes() > net.classes() {
        return Err(Error::LabelOutOfRange {
            label: dataset.classes() - 1,
            classes: net.classes(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut sgd = Sgd::new(config.momentum);
    let mut log = TrainLog::default();
    let mut window = 0.0;
    let mut window_len = 0u64;
    for i in 0..config.max_iterations {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let take = (config.batch_size - batch.len()).min(order.len() - cursor);
            batch.extend_from_slice(&order[cursor..cursor + take]);
            cursor += take;
        }
        let (images, labels) = dataset.batch(&batch)?;
        let lr = lr_at(config, net.step());
        let loss = sgd.step(net, &images, &labels, lr)?;
        log.initial_loss.get_or_insert(loss);
        window += loss;
        window_len += 1;
        if (i + 1) % config.log_every == 0 || i + 1 == config.max_iterations {
            let entry = LogEntry {
                iteration: net.step(),
                learning_rate: lr,
                mean_loss: window / window_len as f64,
            };
            on_log(&entry);
            log.entries.push(entry);
            window = 0.0;
            window_len = 0;
        }
    }
    Ok(log)
}

/// Fraction of images whose inference-mode prediction matches the label.
pub fn accuracy(net: &Network, dataset: &Dataset) -> Result<f64> {
    let mut correct = 0;
    let idx: Vec<usize> = (0..dataset.len()).collect();
    for chunk in idx.chunks(64) {
        let (images, labels) = dataset.batch(chunk)?;
        let logits = net.forward(&images)?.logits;
        let c = logits.shape()[1];
        for (row, &label) in logits.data().chunks(c).zip(&labels) {
            let best = row
                .iter()
                .enumerate()
                .fold(0, |b, (j, &v)| if v > row[b] { j } else { b });
            correct += usize::from(best == label);
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
