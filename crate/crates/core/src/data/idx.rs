//! Big-endian IDX files as used by MNIST-style image sets.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, name: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::data(format!("{name}: truncated header at offset {offset}")))
}

/// Parses an image file into `(count, rows, cols, raw pixels)`.
pub fn read_idx_images(bytes: &[u8], name: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0, name)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::data(format!(
            "{name}: bad magic number {magic:#010x} at offset 0, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, name)? as usize;
    let rows = read_u32(bytes, 8, name)? as usize;
    let cols = read_u32(bytes, 12, name)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::data(format!(
            "{name}: truncated pixel data at offset {}, expected {need} bytes",
            16 + body.len()
        )));
    }
    Ok((count, rows, cols, body[..need].to_vec()))
}

pub fn read_idx_labels(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, name)?;
    if magic != LABEL_MAGIC {
        return Err(Error::data(format!(
            "{name}: bad magic number {magic:#010x} at offset 0, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = read_u32(bytes, 4, name)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::data(format!(
            "{name}: truncated label data at offset {}, expected {count} labels",
            8 + body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

/// Loads an image/label IDX pair, scaling pixels to `[0, 1]`.
pub fn load_idx_images(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let img_name = images_path.display().to_string();
    let lbl_name = labels_path.display().to_string();
    let (count, rows, cols, pixels) = read_idx_images(&images, &img_name)?;
    let labels = read_idx_labels(&labels, &lbl_name)?;
    if labels.len() != count {
        return Err(Error::data(format!(
            "{img_name} holds {count} images but {lbl_name} holds {} labels (count field at offset 4)",
            labels.len()
        )));
    }
    let n = limit.map_or(count, |l| l.min(count));
    if n == 0 {
        return Err(Error::data(format!("{img_name}: requested an empty dataset")));
    }
    let dim = rows * cols;
    let features: Vec<f64> = pixels[..n * dim].iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = labels[..n].iter().map(|&l| l as usize).collect();
    let class_count = labels.iter().max().map_or(1, |m| m + 1).max(2);
    Dataset::new(Matrix::from_vec(n, dim, features)?, labels, class_count)
}
