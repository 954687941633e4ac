//! Parameter and multiply-add accounting for the builtin configs.
//!
//! cargo run --example cost_report [-- config]

use mobilehash::net::{cost_report, NetworkConfig};

fn main() -> mobilehash::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "mobilenet-standard".into());
    let cfg = NetworkConfig::load(&name)?;
    let report = cost_report(&cfg)?;
    print!("{}", report.to_table());

    println!();
    println!(
        "plain classifier: {:.2}M params, {:.0}M multiply-adds",
        report.reference_params as f64 / 1e6,
        report.reference_multiadds as f64 / 1e6
    );
    println!(
        "with {}-bit latent layer: {:.2}M params, {:.0}M multiply-adds, {} KiB as f32",
        report.bits,
        report.total_params as f64 / 1e6,
        report.total_multiadds as f64 / 1e6,
        report.model_bytes_f32() / 1024
    );

    println!();
    println!("separable vs standard convolution, per depthwise/pointwise pair:");
    for p in &report.pairs {
        let r = p.ratio();
        assert_eq!(r, p.closed_form());
        println!(
            "  {}x{} dw, {} -> {} channels: {} = 1/{} + 1/{} ({:.1}x fewer multiply-adds)",
            p.kernel,
            p.kernel,
            p.in_channels,
            p.out_channels,
            r,
            p.out_channels,
            p.kernel * p.kernel,
            p.standard_multiadds as f64 / p.separable_multiadds as f64
        );
    }
    Ok(())
}
