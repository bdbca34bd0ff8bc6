//! IDX reader for MNIST-style image and label files.
//!
//! Images: big-endian magic `0x00000803`, `u32` count, rows, cols, then
//! row-major unsigned bytes. Labels: magic `0x00000801`, `u32` count, bytes.

use std::path::Path;

use ndarray::Array2;

use super::{Dataset, DatasetKind, Normalization};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| Error::TruncatedFile(format!("{what}: header ends at byte {}", bytes.len())))
}

/// Images as `count × (rows·cols)` bytes.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let need = count * rows * cols;
    let data = &bytes[16..];
    if data.len() < need {
        return Err(Error::TruncatedFile(format!(
            "images: header declares {need} pixel bytes, file has {}",
            data.len()
        )));
    }
    Ok((count, rows, cols, &data[..need]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let data = &bytes[8..];
    if data.len() < count {
        return Err(Error::TruncatedFile(format!(
            "labels: header declares {count} labels, file has {}",
            data.len()
        )));
    }
    Ok(&data[..count])
}

/// Encodes images (rows of `rows·cols` bytes) in IDX form.
pub fn encode_idx_images(pixels: &[u8], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reconstruction dataset from in-memory IDX files: pixels scaled by `1/255`,
/// targets equal to inputs, labels kept.
pub fn mnist_from_bytes(images: &[u8], labels: &[u8], limit: Option<usize>) -> Result<Dataset> {
    let (count, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != count {
        return Err(Error::CountMismatch(format!("{count} images but {} labels", labels.len())));
    }
    let n = limit.map_or(count, |l| l.min(count));
    if n == 0 {
        return Err(Error::Config("no images selected".into()));
    }
    let d = rows * cols;
    let inputs = Array2::from_shape_fn((n, d), |(i, k)| pixels[i * d + k] as f64 / 255.0);
    let targets = inputs.clone();
    Dataset::new(
        inputs,
        targets,
        DatasetKind::Mnist,
        Some(labels[..n].to_vec()),
        Normalization::Scaled(1.0 / 255.0),
    )
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, limit: Option<usize>) -> Result<Dataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    mnist_from_bytes(&images, &labels, limit)
}
