use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Batch;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "truncated header".into(),
        })
}

/// Parses an IDX3 image file into `(count, rows·cols, pixels scaled to [0,1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected image magic 0x{IMAGES_MAGIC:08x}, found 0x{magic:08x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let width = rows * cols;
    let body = &bytes[16..];
    let needed = count * width;
    if body.len() < needed {
        return Err(Error::Format {
            offset: (16 + body.len()) as u64,
            message: format!("image data truncated: need {needed} bytes, found {}", body.len()),
        });
    }
    let pixels = body[..needed].iter().map(|&b| b as f64 / 255.0).collect();
    Ok((count, width, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected label magic 0x{LABELS_MAGIC:08x}, found 0x{magic:08x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format {
            offset: (8 + body.len()) as u64,
            message: format!("label data truncated: need {count} bytes, found {}", body.len()),
        });
    }
    Ok(body[..count].iter().map(|&b| b as usize).collect())
}

/// Loads an IDX image/label file pair (MNIST layout).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (count, width, pixels) = parse_idx_images(&images)?;
    let labels = parse_idx_labels(&labels)?;
    if labels.len() != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("{count} images but {} labels", labels.len()),
        });
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(name, num_classes, Batch::new(pixels, width, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    #[test]
    fn two_image_fixture_decodes_exactly() {
        // two 2x2 images
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend_from_slice(&[0, 255, 51, 102, 204, 0, 255, 153]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];

        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img.idx3");
        let lp = dir.path().join("lbl.idx1");
        std::fs::write(&ip, &images).unwrap();
        std::fs::write(&lp, &labels).unwrap();
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.width(), 4);
        assert_eq!(ds.samples.labels, vec![7, 3]);
        assert_eq!(ds.samples.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.samples.row(1), &[0.8, 0.0, 1.0, 0.6]);
    }

    #[test]
    fn header_only_file_is_empty_dataset() {
        let images = header(IMAGES_MAGIC, &[0, 28, 28]);
        let labels = header(LABELS_MAGIC, &[0]);
        let (count, width, pixels) = parse_idx_images(&images).unwrap();
        assert_eq!((count, width, pixels.len()), (0, 784, 0));
        assert!(parse_idx_labels(&labels).unwrap().is_empty());
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let bytes = header(0x0000_0801, &[1, 1, 1]);
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_reports_end_offset() {
        let mut bytes = header(IMAGES_MAGIC, &[2, 2, 2]);
        bytes.extend_from_slice(&[1, 2, 3]);
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset: 19, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_idx_labels(&[0, 0, 8]) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
