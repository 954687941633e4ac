//! Finite-difference checks of every layer's backward pass.
//!
//! cargo run --release --example gradient_check

use mobilehash::gradcheck::{check_layer, check_softmax_cross_entropy, DEFAULT_FLOOR, DEFAULT_STEP};
use mobilehash::layers::{BatchNormLayer, ConvLayer, DenseLayer, Layer};
use mobilehash::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        // keep away from the ReLU kink
        let v: f64 = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) { v } else { -v }
    })
    .unwrap()
}

fn main() -> mobilehash::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bn = BatchNormLayer::new(3)?;
    bn.gamma = random(&[3], &mut rng);
    bn.beta = random(&[3], &mut rng);
    let cases: Vec<(Layer, Vec<usize>)> = vec![
        (Layer::Conv(ConvLayer::standard(2, 3, 3, 1, &mut rng)?), vec![2, 2, 5, 5]),
        (Layer::Conv(ConvLayer::standard(2, 3, 3, 2, &mut rng)?), vec![2, 2, 6, 6]),
        (Layer::Conv(ConvLayer::depthwise(3, 3, 1, &mut rng)?), vec![2, 3, 5, 5]),
        (Layer::Conv(ConvLayer::depthwise(3, 3, 2, &mut rng)?), vec![2, 3, 5, 5]),
        (Layer::Conv(ConvLayer::pointwise(3, 4, &mut rng)?), vec![2, 3, 3, 3]),
        (Layer::BatchNorm(bn), vec![4, 3, 2, 2]),
        (Layer::Relu, vec![2, 3, 3, 3]),
        (Layer::AvgPool, vec![2, 3, 4, 4]),
        (Layer::Dense(DenseLayer::init(6, 4, &mut rng)?), vec![3, 6]),
        (Layer::Sigmoid, vec![3, 5]),
    ];
    for (layer, shape) in &cases {
        let x = random(shape, &mut rng);
        let (y, _, _) = layer.forward_train(&x)?;
        let r = random(y.shape(), &mut rng);
        let check = check_layer(layer, &x, &r, DEFAULT_STEP, DEFAULT_FLOOR)?;
        println!("{:24} input {:?}: max relative error {:.2e}", layer.name(), shape, check.max());
    }
    let logits = random(&[4, 5], &mut rng);
    let err = check_softmax_cross_entropy(&logits, &[0, 3, 4, 1], DEFAULT_STEP, DEFAULT_FLOOR)?;
    println!("{:24} input [4, 5]: max relative error {err:.2e}", "softmax cross-entropy");
    Ok(())
}
