use rand::Rng;

use super::init_uniform;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Affine map `y = x W + e` with `W` stored as `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseRecord {
    input: Tensor,
    input_shape: Vec<usize>,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let &[_, out] = weight.shape() else {
            return Err(Error::Layer {
                layer: "dense".into(),
                message: format!("weight must be rank 2, got {:?}", weight.shape()),
            });
        };
        if bias.shape() != [out] {
            return Err(Error::Layer {
                layer: "dense".into(),
                message: format!("bias shape {:?} does not match {out} outputs", bias.shape()),
            });
        }
        Ok(DenseLayer { weight, bias })
    }

    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        Self::new(init_uniform(&[in_dim, out_dim], in_dim, rng)?, Tensor::zeros(&[out_dim])?)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Flattens all trailing extents of `x` into rows of length `in_dim`.
    fn as_matrix(&self, x: &Tensor) -> Result<Tensor> {
        let batch = x.shape()[0];
        if x.len() != batch * self.in_dim() {
            return Err(Error::Layer {
                layer: "dense".into(),
                message: format!("input {:?} does not flatten to {} features", x.shape(), self.in_dim()),
            });
        }
        x.reshape(&[batch, self.in_dim()])
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = self.as_matrix(x)?.matmul(&self.weight)?;
        let out = self.out_dim();
        for row in y.data_mut().chunks_exact_mut(out) {
            for (v, &b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, DenseRecord)> {
        let input = self.as_matrix(x)?;
        let y = self.forward(&input)?;
        Ok((
            y,
            DenseRecord {
                input,
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    /// Returns `(grad_input, grad_weight, grad_bias)`; `grad_input` has the
    /// shape of the original (unflattened) input.
    pub fn backward(&self, record: &DenseRecord, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let batch = record.input.shape()[0];
        if grad_out.shape() != [batch, self.out_dim()] {
            return Err(Error::ShapeMismatch {
                op: "dense_backward",
                left: grad_out.shape().to_vec(),
                right: vec![batch, self.out_dim()],
            });
        }
        let grad_w = record.input.transpose()?.matmul(grad_out)?;
        let mut grad_b = vec![0.0; self.out_dim()];
        for row in grad_out.data().chunks_exact(self.out_dim()) {
            for (acc, &g) in grad_b.iter_mut().zip(row) {
                *acc += g;
            }
        }
        let grad_x = grad_out
            .matmul(&self.weight.transpose()?)?
            .reshape(&record.input_shape)?;
        Ok((grad_x, grad_w, Tensor::new(&[self.out_dim()], grad_b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let w = Tensor::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let layer = DenseLayer::new(w, Tensor::zeros(&[2]).unwrap()).unwrap();
        let x = Tensor::new(&[1, 2], vec![3.0, -4.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_affine_map() {
        // x = [1, 2], W = [[1, 0, 2], [0, 1, -1]], e = [0.5, 0, 1]
        let w = Tensor::new(&[2, 3], vec![1.0, 0.0, 2.0, 0.0, 1.0, -1.0]).unwrap();
        let e = Tensor::new(&[3], vec![0.5, 0.0, 1.0]).unwrap();
        let layer = DenseLayer::new(w, e).unwrap();
        let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[1.5, 2.0, 1.0]);
    }

    #[test]
    fn accepts_pooled_feature_maps() {
        let layer = DenseLayer::new(Tensor::full(&[3, 1], 1.0).unwrap(), Tensor::zeros(&[1]).unwrap()).unwrap();
        let x = Tensor::new(&[2, 3, 1, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (y, rec) = layer.forward_train(&x).unwrap();
        assert_eq!(y.data(), &[6.0, 15.0]);
        let (gx, _, gb) = layer.backward(&rec, &Tensor::full(&[2, 1], 1.0).unwrap()).unwrap();
        assert_eq!(gx.shape(), &[2, 3, 1, 1]);
        assert_eq!(gb.data(), &[2.0]);
    }

    #[test]
    fn bias_length_checked() {
        assert!(DenseLayer::new(Tensor::zeros(&[2, 3]).unwrap(), Tensor::zeros(&[2]).unwrap()).is_err());
    }
}
