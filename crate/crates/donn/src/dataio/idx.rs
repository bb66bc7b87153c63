//! IDX container parsing for the MNIST-family datasets.

use std::fs;
use std::path::Path;

use crate::error::{DonnError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_ROWS * IMAGE_COLS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Loaded image/label pairs. Pixels are raw 0-255 grayscale.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<[u8; IMAGE_PIXELS]>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` items (or all, when fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DonnError::Format(format!(
            "truncated while reading {what} at byte {offset}"
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse a big-endian IDX image file: magic 0x00000803, count, rows, cols,
/// then raw pixel bytes.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<[u8; IMAGE_PIXELS]>> {
    let magic = be_u32(bytes, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(DonnError::Format(format!(
            "image magic mismatch: expected {IMAGE_MAGIC:#010x}, got {magic:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "image rows")? as usize;
    let cols = be_u32(bytes, 12, "image cols")? as usize;
    if rows != IMAGE_ROWS || cols != IMAGE_COLS {
        return Err(DonnError::Format(format!(
            "expected {IMAGE_ROWS}x{IMAGE_COLS} images, file declares {rows}x{cols}"
        )));
    }
    let expected = 16 + count * IMAGE_PIXELS;
    if bytes.len() < expected {
        return Err(DonnError::Format(format!(
            "image payload truncated at byte {} (need {expected})",
            bytes.len()
        )));
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * IMAGE_PIXELS;
        let mut img = [0u8; IMAGE_PIXELS];
        img.copy_from_slice(&bytes[start..start + IMAGE_PIXELS]);
        images.push(img);
    }
    Ok(images)
}

/// Parse a big-endian IDX label file: magic 0x00000801, count, raw bytes.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(DonnError::Format(format!(
            "label magic mismatch: expected {LABEL_MAGIC:#010x}, got {magic:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(DonnError::Format(format!(
            "label payload truncated at byte {} (need {expected})",
            bytes.len()
        )));
    }
    let labels = bytes[8..8 + count].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(DonnError::Format(format!("label {bad} out of range 0..=9")));
    }
    Ok(labels)
}

/// Load an image/label IDX pair from disk.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(DonnError::Format(format!(
            "count mismatch: {} images vs {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok(Dataset {
        images,
        labels,
        split,
    })
}

/// Load the conventional file names from a directory:
/// `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` or the `t10k-`
/// pair for the test split.
pub fn load_split_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
        split,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&count.to_be_bytes());
        bytes.extend_from_slice(&(IMAGE_ROWS as u32).to_be_bytes());
        bytes.extend_from_slice(&(IMAGE_COLS as u32).to_be_bytes());
        bytes.extend(std::iter::repeat(7u8).take(count as usize * IMAGE_PIXELS));
        bytes
    }

    fn label_file(count: u32) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&count.to_be_bytes());
        bytes.extend((0..count).map(|i| (i % 10) as u8));
        bytes
    }

    #[test]
    fn parses_well_formed_pair() {
        let images = parse_idx_images(&image_file(5)).unwrap();
        let labels = parse_idx_labels(&label_file(5)).unwrap();
        assert_eq!(images.len(), 5);
        assert_eq!(labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_label_magic_in_image_slot() {
        let mut bytes = image_file(1);
        bytes[..4].copy_from_slice(&LABEL_MAGIC.to_be_bytes());
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic mismatch"));
    }

    #[test]
    fn rejects_truncation_with_offset() {
        let bytes = image_file(3);
        let err = parse_idx_images(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(err.to_string().contains("truncated"));
        let err = parse_idx_labels(&label_file(4)[..9]).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn rejects_out_of_range_label() {
        let mut bytes = label_file(3);
        bytes[9] = 11;
        assert!(parse_idx_labels(&bytes).is_err());
    }

    #[test]
    fn rejects_count_mismatch() {
        use std::io::Write;
        let dir = std::env::temp_dir().join(format!("donn-idx-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let ip = dir.join("imgs");
        let lp = dir.join("labels");
        std::fs::File::create(&ip)
            .unwrap()
            .write_all(&image_file(3))
            .unwrap();
        std::fs::File::create(&lp)
            .unwrap()
            .write_all(&label_file(4))
            .unwrap();
        let err = load_idx(&ip, &lp, Split::Train).unwrap_err();
        assert!(err.to_string().contains("count mismatch"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
