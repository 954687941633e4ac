//! Central finite-difference gradient checks.
//!
//! A layer is checked through the scalar `L = sum(r * y)` for a fixed random
//! `r`, so the upstream gradient is `r` and every output element contributes.
//! Relative error per element is `|a - n| / max(|a|, |n|, floor)`.

use crate::error::Result;
use crate::layers::{softmax_cross_entropy, Layer};
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Magnitude below which differences are measured absolutely.
pub const DEFAULT_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max)
}

/// Worst relative error for the input gradient and for each parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub input: f64,
    pub params: Vec<f64>,
}

impl GradCheck {
    pub fn max(&self) -> f64 {
        self.params.iter().copied().fold(self.input, f64::max)
    }
}

fn weighted_sum(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Numeric gradient of `f` with respect to every element of `x`.
pub fn numeric_gradient(x: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> Result<f64>) -> Result<Tensor> {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros_like(x);
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Compares a layer's training-mode backward pass against finite differences
/// of `sum(r * forward_train(x))`.
pub fn check_layer(layer: &Layer, x: &Tensor, r: &Tensor, h: f64, floor: f64) -> Result<GradCheck> {
    let (_, record, _) = layer.forward_train(x)?;
    let (gx, gparams) = layer.backward(Some(&record), r)?;
    let loss = |l: &Layer, x: &Tensor| -> Result<f64> { Ok(weighted_sum(&l.forward_train(x)?.0, r)) };

    let nx = numeric_gradient(x, h, |xp| loss(layer, xp))?;
    let input = max_relative_error(gx.data(), nx.data(), floor);

    let mut params = Vec::with_capacity(gparams.len());
    for (p, g) in gparams.iter().enumerate() {
        let mut probe = layer.clone();
        let base = layer.params()[p].clone();
        let np = numeric_gradient(&base, h, |w| {
            *probe.params_mut()[p] = w.clone();
            loss(&probe, x)
        })?;
        params.push(max_relative_error(g.data(), np.data(), floor));
    }
    Ok(GradCheck { input, params })
}

/// Checks the softmax cross-entropy gradient with respect to the logits.
pub fn check_softmax_cross_entropy(logits: &Tensor, labels: &[usize], h: f64, floor: f64) -> Result<f64> {
    let (_, grad) = softmax_cross_entropy(logits, labels)?;
    let numeric = numeric_gradient(logits, h, |z| Ok(softmax_cross_entropy(z, labels)?.0))?;
    Ok(max_relative_error(grad.data(), numeric.data(), floor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-6), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-6) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0, 1e-6) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn numeric_gradient_of_a_quadratic() {
        let x = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = numeric_gradient(&x, 1e-5, |v| Ok(v.data().iter().map(|a| a * a).sum())).unwrap();
        for (g, x) in g.data().iter().zip(x.data()) {
            assert!((g - 2.0 * x).abs() < 1e-8);
        }
    }
}
