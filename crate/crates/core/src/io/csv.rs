//! CSV ingestion: header row of column names followed by numeric rows.

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::partition::Partition;
use crate::real::Real;
use nalgebra::DMatrix;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Read a CSV file (comma-separated, header row, LF or CRLF) into a
/// [`DataMatrix`]. Non-numeric or non-finite cells and ragged rows are parse
/// errors carrying the 1-based line number.
pub fn read_csv<T: Real>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        None => return Err(Error::Parse { line: 1, message: "file is empty".into() }),
    };
    let names: Vec<String> =
        header.trim_end_matches('\r').split(',').map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(|n| n.is_empty()) {
        return Err(Error::Parse { line: 1, message: "empty column name in header".into() });
    }
    let d = names.len();

    let mut rows: Vec<T> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {d} cells, found {}", cells.len()),
            });
        }
        for cell in cells {
            let v: T = cell.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cell {cell:?} is not numeric"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("cell {cell:?} is not finite"),
                });
            }
            rows.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    let mat = DMatrix::from_row_slice(n_rows, d, &rows);
    DataMatrix::new(mat, names)
}

/// Write a [`DataMatrix`] as CSV with its header row.
pub fn write_csv<T: Real>(data: &DataMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let mut write = |s: String| out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    write(format!("{}\n", data.names().join(",")))?;
    for i in 0..data.n_obs() {
        let row: Vec<String> =
            (0..data.dim()).map(|j| format!("{}", data.values()[(i, j)])).collect();
        write(format!("{}\n", row.join(",")))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Write a partition as `index,label` rows (1-based index) after a header.
pub fn write_partition_csv(partition: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let mut write = |s: String| out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    write("index,label\n".to_string())?;
    for (i, &l) in partition.labels().iter().enumerate() {
        write(format!("{},{}\n", i + 1, l))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Read a partition from `index,label` CSV (header required; arbitrary label
/// values are compacted in order of first appearance).
pub fn read_partition_csv(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if idx == 0 || line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (Some(_), Some(label)) = (cells.next(), cells.next()) else {
            return Err(Error::Parse { line: line_no, message: "expected index,label".into() });
        };
        let label: i64 = label.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("label {label:?} is not an integer"),
        })?;
        raw.push(label);
    }
    if raw.is_empty() {
        return Err(Error::Parse { line: 2, message: "no partition rows".into() });
    }
    Partition::from_raw_labels(&raw)
}
