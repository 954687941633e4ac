//! Trains the toy network on the synthetic 5-class dataset and reports
//! loss, accuracy and retrieval quality.
//!
//! cargo run --release --example train_toy -- [iterations] [lr]

use std::time::Instant;

use mobilehash::net::{Network, NetworkConfig};
use mobilehash::retrieval::{encode_dataset, evaluate_leave_one_out, ApNormalization};
use mobilehash::train::{accuracy, train_with, TrainConfig};
use mobilehash::{codes, generate_synthetic};

fn main() -> mobilehash::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut tc = TrainConfig::toy();
    if let Some(n) = args.first() {
        tc.max_iterations = n.parse().expect("iterations");
    }
    if let Some(lr) = args.get(1) {
        tc.learning_rate = lr.parse().expect("learning rate");
    }
    let dataset = generate_synthetic(5, 40, 32, 7)?;
    let mut net = Network::build(&NetworkConfig::builtin("toy").unwrap(), tc.seed)?;
    println!("{} images, {} parameters", dataset.len(), net.param_count());

    let start = Instant::now();
    let log = train_with(&mut net, &dataset, &tc, |e| {
        println!("iter {:5}  lr {:.0e}  loss {:.4}", e.iteration, e.learning_rate, e.mean_loss);
    })?;
    let initial = log.initial_loss.unwrap_or(f64::NAN);
    let last = log.final_loss().unwrap_or(f64::NAN);
    println!(
        "trained in {:.1?}: loss {initial:.4} -> {last:.4} ({:.1}% decrease)",
        start.elapsed(),
        100.0 * (1.0 - last / initial)
    );
    println!("training accuracy {:.3}", accuracy(&net, &dataset)?);

    let book = encode_dataset(&net, &dataset)?;
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
    for (i, a) in book.codes().iter().enumerate() {
        for b in &book.codes()[i + 1..] {
            let d = codes::hamming(a, b)? as f64;
            if a.label == b.label {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    println!(
        "mean Hamming distance: intra-class {:.3}, inter-class {:.3}",
        intra / n_intra as f64,
        inter / n_inter as f64
    );
    let report = evaluate_leave_one_out(&book, 10, ApNormalization::MinRk)?;
    println!("leave-one-out MAP@10 = {:.4}", report.map);
    Ok(())
}
