//! File loading: IDX image/label files (gzip-transparent) and labeled CSV
//! tables with named columns.

use albench_core::data::load_idx_bytes;
use albench_core::error::{AlError, Result};
use albench_core::matrix::Matrix;
use flate2::read::GzDecoder;
use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::Path;

/// Read a file, decompressing transparently when it starts with the gzip
/// magic bytes.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| AlError::Format(format!("{}: {e}", path.display())))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| AlError::Format(format!("{}: gzip: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Load an IDX image/label file pair from disk (plain or gzipped).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let images = read_maybe_gzip(images_path)?;
    let labels = read_maybe_gzip(labels_path)?;
    load_idx_bytes(&images, &labels)
}

/// A parsed CSV table: features in header order (label/group columns
/// removed), labels and optional groups index-coded by first appearance.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub groups: Option<Vec<usize>>,
    /// Class names in index order.
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
}

/// Load a CSV file with a required header row. `label_column` names the
/// class column; `group_column` optionally names a grouping column. All
/// remaining columns must parse as finite floats. Label and group values
/// are mapped to indices in order of first appearance.
pub fn load_csv(path: &Path, label_column: &str, group_column: Option<&str>) -> Result<CsvTable> {
    let text = fs::read_to_string(path)
        .map_err(|e| AlError::Format(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| AlError::Format(format!("{}: header: {e}", path.display())))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.is_empty() {
        return Err(AlError::Format(format!(
            "{}: empty header row",
            path.display()
        )));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            AlError::Format(format!(
                "{}: label column `{label_column}` not found in header",
                path.display()
            ))
        })?;
    let group_idx = match group_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            AlError::Format(format!(
                "{}: group column `{name}` not found in header",
                path.display()
            ))
        })?),
        None => None,
    };
    if group_idx == Some(label_idx) {
        return Err(AlError::Format(format!(
            "{}: label and group columns must differ",
            path.display()
        )));
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx && Some(*i) != group_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(AlError::Format(format!(
            "{}: no feature columns left after label/group",
            path.display()
        )));
    }

    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut groups: Vec<usize> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut group_index: HashMap<String, usize> = HashMap::new();

    for (row_no, record) in reader.records().enumerate() {
        // 1-based data row numbers in messages, header excluded.
        let record =
            record.map_err(|e| AlError::Format(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(AlError::Format(format!(
                "{}: row {}: expected {} fields, got {}",
                path.display(),
                row_no + 1,
                headers.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let next = label_index.len();
                let id = *label_index.entry(field.to_string()).or_insert(next);
                if id == label_names.len() {
                    label_names.push(field.to_string());
                }
                labels.push(id);
            } else if Some(col) == group_idx {
                let next = group_index.len();
                let id = *group_index.entry(field.to_string()).or_insert(next);
                groups.push(id);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    AlError::Format(format!(
                        "{}: row {}, column `{}`: invalid float `{field}`",
                        path.display(),
                        row_no + 1,
                        headers[col]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(AlError::Format(format!(
                        "{}: row {}, column `{}`: non-finite value",
                        path.display(),
                        row_no + 1,
                        headers[col]
                    )));
                }
                row.push(v);
            }
        }
        feature_rows.push(row);
    }
    if feature_rows.is_empty() {
        return Err(AlError::Format(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let features = Matrix::from_rows(&feature_rows)?;
    Ok(CsvTable {
        features,
        labels,
        groups: group_idx.map(|_| groups),
        label_names,
        feature_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write as _;

    fn idx_image_bytes() -> Vec<u8> {
        // 2 images of 1x2 pixels: [0, 255], [51, 204].
        let mut b = vec![0, 0, 8, 3];
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&1u32.to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&[0, 255, 51, 204]);
        b
    }

    fn idx_label_bytes() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 1];
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&[1, 0]);
        b
    }

    #[test]
    fn idx_loading_is_gzip_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let plain_img = dir.path().join("img.idx");
        let plain_lbl = dir.path().join("lbl.idx");
        fs::write(&plain_img, idx_image_bytes()).unwrap();
        fs::write(&plain_lbl, idx_label_bytes()).unwrap();
        let (feat_a, lab_a) = load_idx(&plain_img, &plain_lbl).unwrap();

        let gz_img = dir.path().join("img.idx.gz");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&idx_image_bytes()).unwrap();
        fs::write(&gz_img, enc.finish().unwrap()).unwrap();
        let (feat_b, lab_b) = load_idx(&gz_img, &plain_lbl).unwrap();

        assert_eq!(feat_a.row(0), feat_b.row(0));
        assert_eq!(feat_a.row(1), feat_b.row(1));
        assert_eq!(lab_a, lab_b);
        assert_eq!(lab_a, vec![1, 0]);
        assert_eq!(feat_a.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn csv_first_appearance_label_indexing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(
            &p,
            "x1,x2,species,site\n1.0,2.0,cat,a\n3.0,4.0,dog,b\n5.0,6.0,cat,a\n",
        )
        .unwrap();
        let t = load_csv(&p, "species", Some("site")).unwrap();
        assert_eq!(t.labels, vec![0, 1, 0]); // cat first => 0
        assert_eq!(t.label_names, vec!["cat", "dog"]);
        assert_eq!(t.groups, Some(vec![0, 1, 0]));
        assert_eq!(t.feature_names, vec!["x1", "x2"]);
        assert_eq!(t.features.rows(), 3);
        assert_eq!(t.features.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "x1,y\n1.0,a\noops,b\n").unwrap();
        let err = load_csv(&p, "y", None).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("`x1`"), "{err}");

        let missing = load_csv(&p, "label", None).unwrap_err().to_string();
        assert!(missing.contains("`label`"), "{missing}");
    }
}
