use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use adahuber::simlab::Table;
use adahuber::Dataset;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot open {path}: {source}")]
    MissingFile { path: PathBuf, source: io::Error },

    #[error("{path}: missing header row")]
    MissingHeader { path: PathBuf },

    #[error("{path}: response column {column:?} not found; available columns: {available}")]
    MissingResponse {
        path: PathBuf,
        column: String,
        available: String,
    },

    #[error("{path}: row {row}, column {column:?}: cannot parse {value:?} as a real number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: malformed CSV: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("{path}: no data rows")]
    Empty { path: PathBuf },

    #[error("{path}: {source}")]
    Model { path: PathBuf, source: adahuber::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// A numeric CSV file: header names and the data in row order.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Reads a CSV whose cells are all decimal reals. Row numbers in errors count
/// data rows from 1; the header is row 0.
pub fn load_numeric(path: &Path, delimiter: u8) -> Result<NumericTable, IoError> {
    let file = File::open(path).map_err(|source| IoError::MissingFile {
        path: path.to_owned(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let malformed = |e: csv::Error| IoError::Malformed {
        path: path.to_owned(),
        message: e.to_string(),
    };
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(malformed)?,
        None => return Err(IoError::MissingHeader { path: path.to_owned() }),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_owned()).collect();
    if names.iter().all(String::is_empty) {
        return Err(IoError::MissingHeader { path: path.to_owned() });
    }
    let width = names.len();
    let mut flat = Vec::new();
    let mut rows = 0;
    for (k, rec) in records.enumerate() {
        let row = k + 1;
        let rec = rec.map_err(malformed)?;
        if rec.len() != width {
            return Err(IoError::Ragged {
                path: path.to_owned(),
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v = cell.trim().parse::<f64>().ok().filter(|v| v.is_finite());
            match v {
                Some(v) => flat.push(v),
                None => {
                    return Err(IoError::Parse {
                        path: path.to_owned(),
                        row,
                        column: names[j].clone(),
                        value: cell.to_owned(),
                    })
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(IoError::Empty { path: path.to_owned() });
    }
    Ok(NumericTable {
        names,
        values: DMatrix::from_row_slice(rows, width, &flat),
    })
}

/// A dataset loaded from CSV together with the covariate names.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    pub response: String,
    pub covariates: Vec<String>,
}

/// The named column becomes the response and every other column, in file
/// order, a covariate.
pub fn load_csv(path: &Path, response: &str, delimiter: u8, intercept: bool) -> Result<LoadedData, IoError> {
    let table = load_numeric(path, delimiter)?;
    let Some(col) = table.names.iter().position(|n| n == response) else {
        return Err(IoError::MissingResponse {
            path: path.to_owned(),
            column: response.to_owned(),
            available: table.names.join(", "),
        });
    };
    let keep: Vec<usize> = (0..table.names.len()).filter(|&j| j != col).collect();
    let x = table.values.select_columns(&keep);
    let y = DVector::from_iterator(table.values.nrows(), table.values.column(col).iter().copied());
    let data = Dataset::new(x, y, intercept).map_err(|source| IoError::Model {
        path: path.to_owned(),
        source,
    })?;
    Ok(LoadedData {
        data,
        response: response.to_owned(),
        covariates: keep.iter().map(|&j| table.names[j].clone()).collect(),
    })
}

/// Writes `y` followed by the covariates, reals with 17 significant digits.
pub fn write_dataset_csv(
    path: &Path,
    response: &str,
    covariates: &[String],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    delimiter: u8,
) -> Result<(), IoError> {
    let mut names = vec![response.to_owned()];
    names.extend(covariates.iter().cloned());
    let mut table = Table::new("dataset", &names.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..y.len() {
        let mut row = vec![y[i].into()];
        row.extend(x.row(i).iter().map(|&v| v.into()));
        table.push(row);
    }
    write_file(path, &table.to_delimited(delimiter as char))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    let wrap = |source| IoError::Write {
        path: path.to_owned(),
        source,
    };
    let mut f = File::create(path).map_err(wrap)?;
    f.write_all(contents.as_bytes()).map_err(wrap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn render(self, table: &Table) -> String {
        match self {
            Format::Csv => table.to_csv(),
            Format::Jsonl => table.to_jsonl(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows() {
        let f = temp_csv("y,x1\n1,2\n3,4\n5,6\n");
        let l = load_csv(f.path(), "y", b',', false).unwrap();
        assert_eq!(l.data.n(), 3);
        assert_eq!(l.data.d(), 1);
        assert_eq!(l.data.y().as_slice(), &[1.0, 3.0, 5.0]);
        assert_eq!(l.covariates, vec!["x1"]);
    }

    #[test]
    fn column_order_is_preserved() {
        let f = temp_csv("a;y;b\n1;2;3\n4;5;6\n");
        let l = load_csv(f.path(), "y", b';', false).unwrap();
        assert_eq!(l.covariates, vec!["a", "b"]);
        assert_eq!(l.data.x().row(1).iter().copied().collect::<Vec<_>>(), vec![4.0, 6.0]);
    }

    #[test]
    fn distinct_located_errors() {
        let f = temp_csv("y,x1\n1,2\n");
        match load_csv(f.path(), "z", b',', false) {
            Err(IoError::MissingResponse { available, .. }) => assert_eq!(available, "y, x1"),
            other => panic!("{other:?}"),
        }
        let f = temp_csv("y,x1\n1,2\n3,abc\n");
        match load_csv(f.path(), "y", b',', false) {
            Err(e @ IoError::Parse { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("row 2") && msg.contains("\"x1\""), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let f = temp_csv("y,x1\n1,\n");
        assert!(matches!(load_csv(f.path(), "y", b',', false), Err(IoError::Parse { row: 1, .. })));
        let f = temp_csv("y,x1\n1,2,3\n");
        assert!(matches!(load_csv(f.path(), "y", b',', false), Err(IoError::Ragged { row: 1, .. })));
        let f = temp_csv("");
        assert!(matches!(load_csv(f.path(), "y", b',', false), Err(IoError::MissingHeader { .. })));
        let f = temp_csv("y,x1\n");
        assert!(matches!(load_csv(f.path(), "y", b',', false), Err(IoError::Empty { .. })));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), "y", b',', false),
            Err(IoError::MissingFile { .. })
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 7 + j * 13) as f64).sin() * 1e3 / 7.0);
        let y = DVector::from_fn(20, |i, _| 1.0 / (i as f64 + 3.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let names = vec!["a".to_owned(), "b".to_owned(), "c".to_owned()];
        write_dataset_csv(&path, "y", &names, &x, &y, b',').unwrap();
        let l = load_csv(&path, "y", b',', false).unwrap();
        assert_eq!(l.data.x(), x);
        assert_eq!(l.data.y(), &y);
    }
}
