//! Saves a briefly trained network, reloads it, and shows what happens when
//! a checkpoint meets a different config.
//!
//! cargo run --release --example checkpoint

use mobilehash::data::generate_synthetic;
use mobilehash::net::{Network, NetworkConfig};
use mobilehash::train::{train, TrainConfig};

fn main() -> mobilehash::Result<()> {
    let cfg = NetworkConfig::builtin("toy").unwrap();
    let ds = generate_synthetic(5, 8, 32, 1)?;
    let mut net = Network::build(&cfg, 0)?;
    let tc = TrainConfig {
        max_iterations: 20,
        log_every: 10,
        ..TrainConfig::toy()
    };
    train(&mut net, &ds, &tc)?;
    // checkpoints store f32; rounding first makes the round trip exact
    net.round_to_f32();

    let path = std::env::temp_dir().join("mobilehash-toy.ckpt");
    net.save_checkpoint(&path)?;
    let loaded = Network::load_checkpoint(&path)?;
    assert_eq!(loaded, net);
    println!(
        "{}: step {}, {} parameters, {} bytes on disk",
        path.display(),
        loaded.step(),
        loaded.param_count(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );

    let wider = cfg.with_bits(32);
    match Network::load_checkpoint_into(&path, &wider) {
        Ok(_) => println!("unexpectedly loaded"),
        Err(e) => println!("loading into a 32-bit config fails: {e}"),
    }
    Ok(())
}
