//! `FMAT1` binary matrix files.
//!
//! Layout: the 5-byte magic `FMAT1`, a `u32` little-endian row count, a
//! `u32` little-endian column count, then `rows × cols` `f64` little-endian
//! values in row-major order. Several matrices may be concatenated in one
//! file (the CLI stores K and V as two consecutive records).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const MAGIC: &[u8; 5] = b"FMAT1";

/// Write one matrix record.
pub fn write_matrix<W: Write>(writer: &mut W, matrix: &DenseMatrix) -> Result<()> {
    let rows = u32::try_from(matrix.rows())
        .map_err(|_| Error::Format(format!("row count {} exceeds u32", matrix.rows())))?;
    let cols = u32::try_from(matrix.cols())
        .map_err(|_| Error::Format(format!("col count {} exceeds u32", matrix.cols())))?;
    writer.write_all(MAGIC)?;
    writer.write_all(&rows.to_le_bytes())?;
    writer.write_all(&cols.to_le_bytes())?;
    for &value in matrix.data() {
        writer.write_all(&value.to_le_bytes())?;
    }
    Ok(())
}

/// Read one matrix record from the current position.
pub fn read_matrix<R: Read>(reader: &mut R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 5];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut word = [0u8; 4];
    reader.read_exact(&mut word)?;
    let rows = u32::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let cols = u32::from_le_bytes(word) as usize;
    // capacity capped: a corrupt header must not force a huge allocation
    // before the payload reads start failing
    let mut data = Vec::with_capacity((rows * cols).min(1 << 20));
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        reader.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Write matrices as consecutive records to a file.
pub fn write_file<P: AsRef<Path>>(path: P, matrices: &[&DenseMatrix]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in matrices {
        write_matrix(&mut file, m)?;
    }
    file.flush()?;
    Ok(())
}

/// Read exactly `count` consecutive records from a file.
pub fn read_file<P: AsRef<Path>>(path: P, count: usize) -> Result<Vec<DenseMatrix>> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    (0..count).map(|_| read_matrix(&mut file)).collect()
}
