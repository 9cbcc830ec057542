//! IDX binary loader (the published big-endian MNIST container).

use crate::data::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::path::Path;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if end > bytes.len() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated IDX header"),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an image/label IDX pair. Pixels are scaled by 1/255 into `[0, 1]`;
/// no mean subtraction. Byte order is read explicitly, so the result does
/// not depend on host endianness.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_u32_be(&image_bytes, 0, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{} has magic {magic:#010x}, expected image magic {IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let n = read_u32_be(&image_bytes, 4, images_path)? as usize;
    let h = read_u32_be(&image_bytes, 8, images_path)? as usize;
    let w = read_u32_be(&image_bytes, 12, images_path)? as usize;
    let pixel_count = n * h * w;
    if image_bytes.len() != 16 + pixel_count {
        return Err(Error::io(
            images_path,
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!(
                    "header promises {} pixel bytes, file has {}",
                    pixel_count,
                    image_bytes.len().saturating_sub(16)
                ),
            ),
        ));
    }

    let magic = read_u32_be(&label_bytes, 0, labels_path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{} has magic {magic:#010x}, expected label magic {LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let n_labels = read_u32_be(&label_bytes, 4, labels_path)? as usize;
    if label_bytes.len() != 8 + n_labels {
        return Err(Error::io(
            labels_path,
            std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated label payload"),
        ));
    }
    if n_labels != n {
        return Err(Error::Consistency(format!(
            "{n} images but {n_labels} labels"
        )));
    }

    let data: Vec<f32> = image_bytes[16..].iter().map(|&b| b as f32 / 255.0).collect();
    let images = Tensor::new(vec![n, 1, h, w], data)?;
    let labels: Vec<usize> = label_bytes[8..].iter().map(|&b| b as usize).collect();
    Dataset::new(images, labels, 10, split)
}

#[cfg(test)]
pub(crate) fn encode_idx_images(images: &[Vec<u8>], h: usize, w: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(h as u32).to_be_bytes());
    out.extend_from_slice(&(w as u32).to_be_bytes());
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

#[cfg(test)]
pub(crate) fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
