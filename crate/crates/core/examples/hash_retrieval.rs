//! Binarizes latent activations, ranks by Hamming distance and scores MAP.
//! Activations here are simulated: each class has a prototype code and
//! samples flip a few bits of it.
//!
//! cargo run --example hash_retrieval

use mobilehash::codes::{binarize, BinaryCode, CodeBook};
use mobilehash::retrieval::{evaluate_leave_one_out, query, ApNormalization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BITS: usize = 64;

fn main() -> mobilehash::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels: Vec<String> = ["harbor", "bridge", "tower", "plaza"].map(String::from).to_vec();
    let prototypes: Vec<Vec<bool>> = (0..labels.len()).map(|_| (0..BITS).map(|_| rng.gen_bool(0.5)).collect()).collect();

    let mut book = CodeBook::new(BITS, labels.clone());
    for i in 0..80 {
        let label = i % labels.len();
        // sigmoid-like activations: confident on the prototype bit, 10% noise
        let act: Vec<f64> = prototypes[label]
            .iter()
            .map(|&b| {
                let bit = if rng.gen_bool(0.1) { !b } else { b };
                if bit { rng.gen_range(0.6..1.0) } else { rng.gen_range(0.0..0.4) }
            })
            .collect();
        book.push(BinaryCode::new(format!("img{i:03}"), label, binarize(&act)))?;
    }

    let q = &book.codes()[0];
    println!("query {} ({}) code {}", q.image_id, labels[q.label], q.bits.to_hex());
    for n in query(&book, q, 5)?.neighbors {
        println!("  {} {:8} distance {}", n.image_id, labels[n.label], n.distance);
    }

    for k in [10, 100] {
        let report = evaluate_leave_one_out(&book, k, ApNormalization::MinRk)?;
        println!("MAP@{k} = {:.4} over {} queries", report.map, report.num_queries);
    }

    let path = std::env::temp_dir().join("mobilehash-example.codes");
    book.save(&path)?;
    assert_eq!(CodeBook::load(&path)?, book);
    println!("code file round-trips: {}", path.display());
    Ok(())
}
