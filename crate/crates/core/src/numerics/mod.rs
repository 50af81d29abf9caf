//! Dense parameter vectors, mini-batches, and the two desk-scale models.

mod model;
mod train;

pub use model::{forward, loss_and_grad, per_sample_loss, predict, Architecture};
pub use train::{local_train, TrainSchedule};

use crate::error::{Error, Result};

/// Flat parameter vector plus per-layer `(rows, cols)` metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub values: Vec<f64>,
    pub shapes: Vec<(usize, usize)>,
}

impl ModelParams {
    pub fn zeros(shapes: Vec<(usize, usize)>) -> Self {
        let dim = shapes.iter().map(|(r, c)| r * c).sum();
        Self {
            values: vec![0.0; dim],
            shapes,
        }
    }

    pub fn from_values(values: Vec<f64>, shapes: Vec<(usize, usize)>) -> Result<Self> {
        let dim: usize = shapes.iter().map(|(r, c)| r * c).sum();
        if dim != values.len() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        Ok(Self { values, shapes })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Index ranges of each layer inside `values`.
    pub fn layer_ranges(&self) -> Vec<std::ops::Range<usize>> {
        layer_ranges(&self.shapes)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(values, self.shapes.clone())
    }

    /// Writes a little-endian binary checkpoint.
    pub fn write_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.shapes.len() * 16 + self.dim() * 8);
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&(self.shapes.len() as u64).to_le_bytes());
        for &(r, c) in &self.shapes {
            buf.extend_from_slice(&(r as u64).to_le_bytes());
            buf.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cursor = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = cursor + n;
            let slice = bytes.get(cursor..end).ok_or_else(|| Error::Format {
                offset: cursor as u64,
                message: "truncated checkpoint".into(),
            })?;
            cursor = end;
            Ok(slice)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "bad checkpoint magic".into(),
            });
        }
        let read_u64 = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
        let layers = read_u64(take(8)?) as usize;
        let mut shapes = Vec::with_capacity(layers);
        for _ in 0..layers {
            let r = read_u64(take(8)?) as usize;
            let c = read_u64(take(8)?) as usize;
            shapes.push((r, c));
        }
        let dim: usize = shapes.iter().map(|(r, c)| r * c).sum();
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        Self::from_values(values, shapes)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FTCK";

pub(crate) fn layer_ranges(shapes: &[(usize, usize)]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    shapes
        .iter()
        .map(|(r, c)| {
            let range = start..start + r * c;
            start = range.end;
            range
        })
        .collect()
}

/// Row-major feature matrix with integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub features: Vec<f64>,
    pub width: usize,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Vec<f64>, width: usize, labels: Vec<usize>) -> Result<Self> {
        if width == 0 && !labels.is_empty() {
            return Err(Error::InvalidInput("zero feature width".into()));
        }
        if features.len() != width * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: width * labels.len(),
                actual: features.len(),
            });
        }
        Ok(Self {
            features,
            width,
            labels,
        })
    }

    pub fn empty(width: usize) -> Self {
        Self {
            features: Vec::new(),
            width,
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn push(&mut self, row: &[f64], label: usize) {
        debug_assert_eq!(row.len(), self.width);
        self.features.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut out = Batch {
            features: Vec::with_capacity(indices.len() * self.width),
            width: self.width,
            labels: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.push(self.row(i), self.labels[i]);
        }
        out
    }

    pub fn concat(&self, other: &Batch) -> Batch {
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out
    }
}

/// Dense row-major matrix, used for class-probability outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
