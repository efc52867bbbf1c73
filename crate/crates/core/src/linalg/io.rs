//! Matrix files.
//!
//! Two formats are supported:
//!
//! * CSV: one matrix row per line, comma separated, no header. Lines that
//!   start with `#` are ignored on read.
//! * SPMX binary: the 4-byte magic `SPMX`, then `rows` and `cols` as
//!   little-endian `u64`, then `rows * cols` little-endian `f64` values in
//!   column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::matrix::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"SPMX";

pub fn write_binary<W: Write>(m: &DenseMatrix, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)
            .map_err(|_| Error::Format(format!("payload shorter than {rows}x{cols}")))?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_csv<W: Write>(m: &DenseMatrix, w: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.rows() {
        writer
            .write_record(m.row(i).iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {line}: cannot parse {field:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "row {line} has {} fields, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    DenseMatrix::from_rows(&refs)
}

/// Reads a matrix, choosing the format from the extension (`.csv` or binary).
pub fn load(path: &Path) -> Result<DenseMatrix> {
    let file = BufReader::new(File::open(path)?);
    if is_csv(path) {
        read_csv(file)
    } else {
        read_binary(file)
    }
}

/// Writes a matrix, choosing the format from the extension (`.csv` or binary).
pub fn save(m: &DenseMatrix, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_csv(m, file)
    } else {
        write_binary(m, file)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_rows(&[&[1.0, -0.5, 1e-300], &[0.1, 2.0 / 3.0, -7.25e12]]).unwrap()
    }

    #[test]
    fn binary_layout() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SPMX");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 2.0);
        assert_eq!(buf.len(), 36);
    }

    #[test]
    fn binary_and_csv_round_trip_exactly() {
        let m = sample();
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(read_binary(buf.as_slice()).unwrap(), m);
        let mut text = Vec::new();
        write_csv(&m, &mut text).unwrap();
        assert_eq!(read_csv(text.as_slice()).unwrap(), m);
    }

    #[test]
    fn binary_rejects_corruption() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_binary(bad_magic.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_binary(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(read_binary(trailing.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_skips_comments_and_checks_shape() {
        let text = "# comment\n1, 2\n3,4\n";
        let m = read_csv(text.as_bytes()).unwrap();
        assert_eq!(m, DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
        assert!(read_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_csv("1,x\n".as_bytes()).is_err());
        assert!(read_csv("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn save_and_load_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        for name in ["m.bin", "m.csv"] {
            let path = dir.path().join(name);
            save(&m, &path).unwrap();
            assert_eq!(load(&path).unwrap(), m);
        }
    }
}
