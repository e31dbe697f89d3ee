//! Dataset files: IDX (big-endian, MNIST layout) and CSV.

use std::fs;
use std::path::Path;

use infovae_core::data::Dataset;

use crate::error::{LabError, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(LabError::io(path))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| LabError::format(path, "truncated header"))
}

/// Parses an IDX image file into rows of pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(LabError::format(
            path,
            format!("bad image magic {magic:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let d = rows * cols;
    if n == 0 || d == 0 {
        return Err(LabError::format(path, "empty image set"));
    }
    let body = &bytes[16..];
    if body.len() != n * d {
        return Err(LabError::format(
            path,
            format!(
                "expected {} pixel bytes for {n}x{rows}x{cols}, found {}",
                n * d,
                body.len()
            ),
        ));
    }
    Ok(body
        .chunks(d)
        .map(|img| img.iter().map(|&p| f64::from(p) / 255.0).collect())
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(LabError::format(
            path,
            format!("bad label magic {magic:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(LabError::format(
            path,
            format!("expected {n} labels, found {}", body.len()),
        ));
    }
    Ok(body.iter().map(|&l| usize::from(l)).collect())
}

/// Loads IDX images and, optionally, their labels.
pub fn load_digits_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let x = parse_idx_images(&read(images)?, images)?;
    let labels = match labels {
        Some(p) => {
            let l = parse_idx_labels(&read(p)?, p)?;
            if l.len() != x.len() {
                return Err(LabError::format(
                    p,
                    format!("{} labels for {} images", l.len(), x.len()),
                ));
            }
            Some(l)
        }
        None => None,
    };
    Ok(Dataset::new("idx", x, labels, false)?)
}

/// Loads a CSV with a header row and one sample per row. A column named
/// `label` is taken as the class. Pixels may be in `[0, 1]` or `[0, 255]`;
/// the latter are rescaled.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::Io {
            path: path.into(),
            source: io,
        },
        other => LabError::format(path, format!("{other:?}")),
    })?;
    let bad = |e: csv::Error| LabError::format(path, e.to_string());
    let label_col = reader
        .headers()
        .map_err(bad)?
        .iter()
        .position(|h| h.trim() == "label");
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(bad)?;
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let field = field.trim();
            if Some(j) == label_col {
                let l = field.parse::<usize>().map_err(|_| {
                    LabError::format(path, format!("row {}: bad label `{field}`", i + 1))
                })?;
                labels.push(l);
                continue;
            }
            let v = field.parse::<f64>().map_err(|_| {
                LabError::format(path, format!("row {}: bad value `{field}`", i + 1))
            })?;
            if !(0.0..=255.0).contains(&v) {
                return Err(LabError::format(
                    path,
                    format!("row {}: value {v} outside [0, 255]", i + 1),
                ));
            }
            row.push(v);
        }
        x.push(row);
    }
    if x.is_empty() {
        return Err(LabError::format(path, "no rows"));
    }
    if x.iter().flatten().any(|v| *v > 1.0) {
        for v in x.iter_mut().flatten() {
            *v /= 255.0;
        }
    }
    let labels = label_col.map(|_| labels);
    Dataset::new("csv", x, labels, false).map_err(|e| LabError::format(path, e.to_string()))
}
