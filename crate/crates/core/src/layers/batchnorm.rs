//! Per-channel batch normalization over `[batch, channels, height, width]`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f64,
    /// Weight of the previous running statistic in the exponential average.
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormRecord {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

/// Statistics of one training batch, applied to the running averages by
/// [`BatchNormLayer::update_running`].
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance estimate (biased when only one value per channel).
    pub var: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(BatchNormLayer {
            gamma: Tensor::full(&[channels], 1.0)?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::full(&[channels], 1.0)?,
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor) -> Result<[usize; 4]> {
        let dims = x.dims4()?;
        if dims[1] != self.channels() {
            return Err(Error::Layer {
                layer: "batchnorm".into(),
                message: format!("expected {} channels, got {}", self.channels(), dims[1]),
            });
        }
        Ok(dims)
    }

    /// Normalizes with the running statistics.
    pub fn forward_infer(&self, x: &Tensor) -> Result<Tensor> {
        let [batch, channels, h, w] = self.check(x)?;
        let plane = h * w;
        let mut out = x.clone();
        for c in 0..channels {
            let scale = self.gamma.data()[c] / (self.running_var.data()[c] + self.epsilon).sqrt();
            let shift = self.beta.data()[c] - self.running_mean.data()[c] * scale;
            for b in 0..batch {
                for v in &mut out.data_mut()[(b * channels + c) * plane..][..plane] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(out)
    }

    /// Normalizes with batch statistics. Running statistics are not touched;
    /// pass the returned [`BatchStats`] to [`BatchNormLayer::update_running`].
    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, BatchNormRecord, BatchStats)> {
        let [batch, channels, h, w] = self.check(x)?;
        let plane = h * w;
        let count = (batch * plane) as f64;
        let mut normalized = Tensor::zeros_like(x);
        let mut out = Tensor::zeros_like(x);
        let mut inv_std = Vec::with_capacity(channels);
        let mut stats = BatchStats {
            mean: Vec::with_capacity(channels),
            var: Vec::with_capacity(channels),
        };
        let xd = x.data();
        for c in 0..channels {
            let planes = || (0..batch).map(move |b| (b * channels + c) * plane);
            let mut sum = 0.0;
            for start in planes() {
                sum += xd[start..start + plane].iter().sum::<f64>();
            }
            let mean = sum / count;
            let mut sq = 0.0;
            for start in planes() {
                sq += xd[start..start + plane].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            let var = sq / count;
            let istd = 1.0 / (var + self.epsilon).sqrt();
            let (g, bt) = (self.gamma.data()[c], self.beta.data()[c]);
            for start in planes() {
                let span = start..start + plane;
                let norm = &mut normalized.data_mut()[span.clone()];
                let y = &mut out.data_mut()[span.clone()];
                for ((x, n), y) in xd[span].iter().zip(norm).zip(y) {
                    *n = (x - mean) * istd;
                    *y = g * *n + bt;
                }
            }
            inv_std.push(istd);
            stats.mean.push(mean);
            stats
                .var
                .push(if count > 1.0 { sq / (count - 1.0) } else { var });
        }
        Ok((out, BatchNormRecord { normalized, inv_std }, stats))
    }

    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = m * *r + (1.0 - m) * v;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = m * *r + (1.0 - m) * v;
        }
    }

    /// Returns `(grad_input, grad_gamma, grad_beta)`.
    pub fn backward(&self, record: &BatchNormRecord, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        if grad_out.shape() != record.normalized.shape() {
            return Err(Error::ShapeMismatch {
                op: "batchnorm_backward",
                left: grad_out.shape().to_vec(),
                right: record.normalized.shape().to_vec(),
            });
        }
        let [batch, channels, h, w] = grad_out.dims4()?;
        let plane = h * w;
        let count = (batch * plane) as f64;
        let gd = grad_out.data();
        let xh = record.normalized.data();
        let mut grad_x = Tensor::zeros_like(grad_out);
        let mut grad_gamma = Tensor::zeros_like(&self.gamma);
        let mut grad_beta = Tensor::zeros_like(&self.beta);
        for c in 0..channels {
            let planes = || (0..batch).map(move |b| (b * channels + c) * plane);
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for start in planes() {
                for i in start..start + plane {
                    sum_g += gd[i];
                    sum_gx += gd[i] * xh[i];
                }
            }
            grad_gamma.data_mut()[c] = sum_gx;
            grad_beta.data_mut()[c] = sum_g;
            let scale = self.gamma.data()[c] * record.inv_std[c] / count;
            for start in planes() {
                for i in start..start + plane {
                    grad_x.data_mut()[i] = scale * (count * gd[i] - sum_g - xh[i] * sum_gx);
                }
            }
        }
        Ok((grad_x, grad_gamma, grad_beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn train_mode_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Tensor::from_fn(&[4, 3, 5, 5], |_| rng.gen_range(-3.0..5.0)).unwrap();
        let bn = BatchNormLayer::new(3).unwrap();
        let (y, _, _) = bn.forward_train(&x).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| y.data()[(b * 3 + c) * 25..][..25].to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-6);
            // epsilon shrinks the variance slightly below one
            assert!((var - 1.0).abs() < 1e-4, "{var}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNormLayer::new(2).unwrap();
        bn.beta.data_mut().copy_from_slice(&[0.25, -1.5]);
        let x = Tensor::full(&[1, 2, 3, 3], 7.0).unwrap();
        let (y, _, _) = bn.forward_train(&x).unwrap();
        assert!(y.data()[..9].iter().all(|&v| (v - 0.25).abs() < 1e-12));
        assert!(y.data()[9..].iter().all(|&v| (v + 1.5).abs() < 1e-12));
        assert!(y.is_finite());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNormLayer::new(1).unwrap();
        let x = Tensor::new(&[2, 1, 1, 1], vec![1.0, 3.0]).unwrap();
        let (_, _, stats) = bn.forward_train(&x).unwrap();
        bn.update_running(&stats);
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-12);
        // unbiased batch variance is 2
        assert!((bn.running_var.data()[0] - (0.9 + 0.2)).abs() < 1e-12);
        let y = bn.forward_infer(&x).unwrap();
        let scale = 1.0 / (1.1f64 + 1e-5).sqrt();
        assert!((y.data()[0] - 0.8 * scale).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let bn = BatchNormLayer::new(2).unwrap();
        assert!(bn.forward_infer(&Tensor::zeros(&[1, 3, 2, 2]).unwrap()).is_err());
    }
}
