//! Domain CSV files and the `<root>/session<k>/subject<j>.csv` layout.
//!
//! Header: `f0,f1,...,f{d-1},label`. One sample per line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DomainDataset, DomainId};
use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

pub const DEFAULT_SESSIONS: u32 = 3;
pub const DEFAULT_SUBJECTS: u32 = 15;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Optional `manifest.json` at a dataset root declaring which cells exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_classes: usize,
    /// `(session, subject)` pairs, 1-based.
    pub cells: Vec<(u32, u32)>,
}

pub fn domain_path(root: &Path, id: DomainId) -> PathBuf {
    root.join(format!("session{}", id.session))
        .join(format!("subject{}.csv", id.subject))
}

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses one domain file. Labels must lie in `[0, num_classes)`.
pub fn load_domain_csv(
    path: impl AsRef<Path>,
    id: DomainId,
    num_classes: usize,
) -> Result<DomainDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let width = header.len();
    if width < 2 {
        return Err(parse_error(
            path,
            1,
            "header needs at least one feature and a label",
        ));
    }
    for (i, name) in header.iter().enumerate() {
        let expected = if i + 1 == width {
            "label".to_string()
        } else {
            format!("f{i}")
        };
        if name != expected {
            return Err(parse_error(
                path,
                1,
                format!("header column {i} is {name:?}, expected {expected:?}"),
            ));
        }
    }
    let dim = width - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_error(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().take(dim).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(path, line, format!("column f{c}: {cell:?} is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    line,
                    format!("column f{c}: non-finite value"),
                ));
            }
            data.push(v);
        }
        let raw = &record[dim];
        let label: usize = raw.parse().map_err(|_| {
            parse_error(
                path,
                line,
                format!("label {raw:?} is not a non-negative integer"),
            )
        })?;
        if label >= num_classes {
            return Err(parse_error(
                path,
                line,
                format!("label {label} outside [0, {num_classes})"),
            ));
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let features = Matrix::new(labels.len(), dim, data)?;
    DomainDataset::new(features, labels, id, num_classes)
}

/// Writes a domain in the CSV contract. Values use the shortest exact decimal form.
pub fn write_domain_csv(path: impl AsRef<Path>, ds: &DomainDataset) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
    let mut header: Vec<String> = (0..ds.feature_dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_io_error(path, e))?;
    let mut row = Vec::with_capacity(ds.feature_dim() + 1);
    for (features, label) in ds.features.iter_rows().zip(&ds.labels) {
        row.clear();
        row.extend(features.iter().map(|v| v.to_string()));
        row.push(label.to_string());
        w.write_record(&row).map_err(|e| csv_io_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Loads every cell of a dataset root.
///
/// With a manifest, exactly the listed cells are loaded. Without one, the full
/// 3 × 15 grid is expected and the class count is inferred from the labels.
pub fn load_dataset_dir(root: impl AsRef<Path>) -> Result<Vec<DomainDataset>> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    let (cells, num_classes) = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        (m.cells, Some(m.num_classes))
    } else {
        let cells = (1..=DEFAULT_SESSIONS)
            .flat_map(|s| (1..=DEFAULT_SUBJECTS).map(move |j| (s, j)))
            .collect();
        (cells, None)
    };
    let mut out = Vec::with_capacity(cells.len());
    for (session, subject) in cells {
        let id = DomainId::new(session, subject);
        let path = domain_path(root, id);
        if !path.exists() {
            return Err(Error::Data(format!(
                "missing grid cell {id}: {} not found",
                path.display()
            )));
        }
        // labels are range-checked against a generous bound, then tightened below
        out.push(load_domain_csv(
            &path,
            id,
            num_classes.unwrap_or(usize::MAX),
        )?);
    }
    let classes = match num_classes {
        Some(c) => c,
        None => out
            .iter()
            .flat_map(|d| d.labels.iter().copied())
            .max()
            .map_or(2, |m| (m + 1).max(2)),
    };
    for d in &mut out {
        d.num_classes = classes;
    }
    Ok(out)
}

pub fn write_dataset_dir(root: impl AsRef<Path>, domains: &[DomainDataset]) -> Result<()> {
    let root = root.as_ref();
    let Some(first) = domains.first() else {
        return Err(Error::validation("nothing to write"));
    };
    for d in domains {
        write_domain_csv(domain_path(root, d.domain_id), d)?;
    }
    let manifest = Manifest {
        num_classes: first.num_classes,
        cells: domains
            .iter()
            .map(|d| (d.domain_id.session, d.domain_id.subject))
            .collect(),
    };
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "f0,f1,label\n1.5,-2,0\n3e-1,4,2\n");
        let ds = load_domain_csv(&p, DomainId::new(1, 1), 3).unwrap();
        assert_eq!(ds.features.shape(), (2, 2));
        assert_eq!(ds.features.row(1), &[0.3, 4.0]);
        assert_eq!(ds.labels, vec![0, 2]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let id = DomainId::new(1, 1);
        let cases = [
            ("f0,label\n1,0\nabc,1\n", "line 3"),
            ("f0,label\n1,0\n2,5\n", "line 3"),
            ("f0,label\n1,0\n2,-1\n", "line 3"),
            ("f0,label\n1,0\n2\n", "line 3"),
            ("x0,label\n1,0\n", "line 1"),
        ];
        for (text, needle) in cases {
            let p = write(dir.path(), "bad.csv", text);
            let err = load_domain_csv(&p, id, 3).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{err}");
            assert!(err.to_string().contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn empty_data_section_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "empty.csv", "f0,f1,label\n");
        assert!(matches!(
            load_domain_csv(&p, DomainId::new(1, 1), 3),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn directory_round_trip_and_missing_cell() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |s, j| {
            DomainDataset::new(
                Matrix::new(2, 3, vec![0.1, 0.2, 0.3, 1.0 / 3.0, -5.0, 1e-300]).unwrap(),
                vec![0, 3],
                DomainId::new(s, j),
                4,
            )
            .unwrap()
        };
        let domains = vec![mk(1, 1), mk(1, 2), mk(2, 1), mk(2, 2)];
        write_dataset_dir(dir.path(), &domains).unwrap();
        let back = load_dataset_dir(dir.path()).unwrap();
        assert_eq!(back, domains);

        fs::remove_file(domain_path(dir.path(), DomainId::new(2, 1))).unwrap();
        let err = load_dataset_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("session2/subject1"), "{err}");
    }
}
