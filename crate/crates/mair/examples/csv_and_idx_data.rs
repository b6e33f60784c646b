//! File-based dataset ingestion: CSV round-trip at full precision and a
//! tiny hand-built IDX image/label pair with pixel scaling into [0, 1].
//!
//! ```bash
//! cargo run --example csv_and_idx_data
//! ```

use mair::data::{generate, load_csv, load_idx, save_csv, CsvSchema, SyntheticKind, SyntheticSpec};

fn main() -> mair::Result<()> {
    let dir = std::env::temp_dir().join("mair_data_example");
    std::fs::create_dir_all(&dir)?;

    // CSV round trip.
    let original = generate(&SyntheticSpec {
        kind: SyntheticKind::ConcentricRings,
        n_per_class: 25,
        noise: 0.05,
        seed: 6,
    })?;
    let csv_path = dir.join("rings.csv");
    save_csv(&original, &csv_path)?;
    let reloaded = load_csv(
        &csv_path,
        &CsvSchema {
            features: 2,
            classes: 2,
        },
    )?;
    println!(
        "csv round trip: {} rows, inputs exactly equal: {}",
        reloaded.len(),
        original.inputs == reloaded.inputs
    );

    // A 3-image IDX pair, 2x2 pixels each; magic numbers 0x803 and 0x801.
    let mut images = Vec::new();
    images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    images.extend_from_slice(&3u32.to_be_bytes());
    images.extend_from_slice(&2u32.to_be_bytes());
    images.extend_from_slice(&2u32.to_be_bytes());
    images.extend_from_slice(&[0, 64, 128, 255, 10, 20, 30, 40, 255, 255, 0, 0]);
    let mut labels = Vec::new();
    labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    labels.extend_from_slice(&3u32.to_be_bytes());
    labels.extend_from_slice(&[0, 1, 1]);

    let img_path = dir.join("images.idx");
    let lab_path = dir.join("labels.idx");
    std::fs::write(&img_path, images)?;
    std::fs::write(&lab_path, labels)?;

    let idx = load_idx(&img_path, &lab_path)?;
    println!(
        "idx: {} images of dim {}, domain box {:?}",
        idx.len(),
        idx.dim(),
        idx.domain_box
    );
    println!("first image (byte 255 -> exactly 1.0): {:?}", idx.row(0));
    println!("labels: {:?}", idx.labels);
    Ok(())
}
