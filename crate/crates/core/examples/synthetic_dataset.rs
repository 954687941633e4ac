//! Generates the synthetic dataset, writes it as PPM files with a manifest,
//! and loads it back through the manifest reader.
//!
//! cargo run --example synthetic_dataset [-- out_dir]

use mobilehash::data::{generate_synthetic, load_manifest, Dataset};

fn main() -> mobilehash::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => std::env::temp_dir().join("mobilehash-synthetic"),
    };
    let ds = generate_synthetic(5, 40, 32, 7)?;
    let manifest_path = ds.write_ppm_dir(&dir)?;
    println!("wrote {} images to {}", ds.len(), dir.display());

    let manifest = load_manifest(&manifest_path)?;
    println!("manifest: {} records, classes {:?}, size {:?}", manifest.entries.len(), manifest.labels, manifest.size);
    let reloaded = Dataset::from_manifest(&manifest, 32, 32)?;
    assert_eq!(reloaded, ds, "PPM round trip is lossless for 8-bit data");

    // loading at another resolution resizes bilinearly
    let small = Dataset::from_manifest(&manifest, 16, 16)?;
    println!("resized on load: {:?}", small.records()[0].image.shape());

    for class in 0..ds.classes() {
        let imgs: Vec<_> = ds.records().iter().filter(|r| r.label == class).collect();
        let plane = 32 * 32;
        let mean: Vec<f64> = (0..3)
            .map(|c| imgs.iter().map(|r| r.image.data()[c * plane..][..plane].iter().sum::<f64>()).sum::<f64>() / (plane * imgs.len()) as f64)
            .collect();
        println!("{}: {} images, mean RGB {:.3} {:.3} {:.3}", ds.labels()[class], imgs.len(), mean[0], mean[1], mean[2]);
    }
    Ok(())
}
