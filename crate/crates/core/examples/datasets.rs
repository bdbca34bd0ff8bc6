//! Synthetic generators and the on-disk formats: binary container and CSV.
//!
//! cargo run --example datasets

use autoencode::data_io::{gen_gaussian_classification, gen_parabola, load_dataset, save_dataset, DatasetFormat};

fn main() -> autoencode::Result<()> {
    let dir = std::env::temp_dir();
    let blobs = gen_gaussian_classification(200, 5)?;
    let para = gen_parabola(50, 5, (-1.0, 1.0))?;
    let positives = blobs.labels.as_ref().map_or(0, |l| l.iter().filter(|&&v| v == 1).count());
    println!("classification: {} points, {positives} labelled positive", blobs.len());
    println!("parabola: first point {:?}", para.inputs.row(0).to_vec());

    let bin = dir.join("blobs.bin");
    let csv = dir.join("parabola.csv");
    save_dataset(&bin, &blobs, DatasetFormat::Binary)?;
    save_dataset(&csv, &para, DatasetFormat::Csv)?;
    assert_eq!(load_dataset(&bin)?, blobs);
    let back = load_dataset(&csv)?;
    println!("csv round trip max error {:.1e}", (&back.inputs - &para.inputs).iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let (train, test) = blobs.split(0.8, 1)?;
    println!("split: {} train, {} test", train.len(), test.len());
    Ok(())
}
