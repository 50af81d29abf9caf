use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Batch;

/// Loads a CSV with a header row; the column named `label` holds integer
/// class ids and every other column is a numeric feature.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| Error::Format {
            offset: 0,
            message: "no column named \"label\"".into(),
        })?;
    let width = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let offset = record.position().map_or(0, |p| p.byte());
        for (i, field) in record.iter().enumerate() {
            let field = field.trim();
            if i == label_col {
                let y: usize = field.parse().map_err(|_| Error::Format {
                    offset,
                    message: format!("label {field:?} is not a class id"),
                })?;
                labels.push(y);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Format {
                    offset,
                    message: format!("feature {field:?} is not numeric"),
                })?;
                features.push(v);
            }
        }
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::new(name, num_classes, Batch::new(features, width, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_column_can_sit_anywhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,label,b\n0.5,1,2\n-1,0,3.25\n").unwrap();
        let ds = load_csv(&path).unwrap();
        assert_eq!(ds.samples.labels, vec![1, 0]);
        assert_eq!(ds.samples.features, vec![0.5, 2.0, -1.0, 3.25]);
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn missing_label_column_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(load_csv(&path), Err(Error::Format { .. })));
    }
}
