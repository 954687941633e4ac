use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel mean over a square spatial map; `[b, c, h, h] -> [b, c, 1, 1]`.
pub fn avgpool_global_forward(x: &Tensor) -> Result<Tensor> {
    let [batch, channels, h, w] = x.dims4()?;
    if h != w {
        return Err(Error::Layer {
            layer: "avgpool".into(),
            message: format!("expected square input, got {h}x{w}"),
        });
    }
    let plane = h * w;
    let data = x
        .data()
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f64>() / plane as f64)
        .collect();
    Tensor::new(&[batch, channels, 1, 1], data)
}

/// Spreads each pooled gradient uniformly over the `input_shape` plane.
pub fn avgpool_global_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let &[batch, channels, h, w] = input_shape else {
        return Err(Error::InvalidShape(input_shape.to_vec()));
    };
    if grad_out.len() != batch * channels {
        return Err(Error::ShapeMismatch {
            op: "avgpool_backward",
            left: grad_out.shape().to_vec(),
            right: vec![batch, channels, 1, 1],
        });
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(batch * channels * plane);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g / plane as f64, plane));
    }
    Tensor::new(input_shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_small_cases() {
        let x = Tensor::full(&[1, 2, 3, 3], 4.5).unwrap();
        assert_eq!(avgpool_global_forward(&x).unwrap().data(), &[4.5, 4.5]);
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = avgpool_global_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn backward_is_uniform() {
        let g = Tensor::new(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let gx = avgpool_global_backward(&[1, 1, 2, 2], &g).unwrap();
        assert_eq!(gx.data(), &[0.5; 4]);
    }

    #[test]
    fn non_square_rejected() {
        assert!(avgpool_global_forward(&Tensor::zeros(&[1, 1, 2, 3]).unwrap()).is_err());
    }
}
