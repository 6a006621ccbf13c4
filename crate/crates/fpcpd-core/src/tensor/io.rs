//! Tensor file formats.
//!
//! Binary format `FPT3`: the 4-byte magic string, three little-endian
//! 64-bit dimensions `(I, J, K)`, then `I*J*K` little-endian 64-bit
//! floats in canonical (mode-1 fastest) layout.
//!
//! CSV ingestion: rows of `i,j,k,value` with 0-based indices. Dimensions
//! are the maximum index plus one per mode; unlisted entries are zero.
//! A header row is skipped if its first field is not an integer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor3;

const MAGIC: &[u8; 4] = b"FPT3";

pub fn write_tensor<W: Write>(w: &mut W, t: &DenseTensor3) -> Result<()> {
    w.write_all(MAGIC)?;
    let (i, j, k) = t.dims();
    for d in [i, j, k] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_tensor<P: AsRef<Path>>(path: P, t: &DenseTensor3) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<DenseTensor3> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadFormat(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut dims = [0usize; 3];
    let mut buf8 = [0u8; 8];
    for d in dims.iter_mut() {
        r.read_exact(&mut buf8)?;
        let v = u64::from_le_bytes(buf8);
        *d = usize::try_from(v)
            .map_err(|_| Error::BadFormat(format!("dimension {v} too large")))?;
    }
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|p| p.checked_mul(dims[2]))
        .ok_or_else(|| Error::BadFormat("dimension product overflows".into()))?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf8)?;
        values.push(f64::from_le_bytes(buf8));
    }
    DenseTensor3::new((dims[0], dims[1], dims[2]), values)
}

pub fn load_tensor<P: AsRef<Path>>(path: P) -> Result<DenseTensor3> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

/// Read a tensor from `i,j,k,value` CSV rows.
pub fn load_tensor_csv<P: AsRef<Path>>(path: P) -> Result<DenseTensor3> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize, 0usize);
    for (line_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = line_idx + 1;
        if record.len() == 0 || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        if line == 1 && record.get(0).map_or(false, |f| f.parse::<usize>().is_err()) {
            continue; // header row
        }
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                detail: format!("expected 4 fields i,j,k,value, got {}", record.len()),
            });
        }
        let idx =
            |pos: usize| -> Result<usize> {
                record[pos].parse().map_err(|_| Error::Parse {
                    line,
                    detail: format!("bad index {:?}", &record[pos]),
                })
            };
        let (i, j, k) = (idx(0)?, idx(1)?, idx(2)?);
        let v: f64 = record[3].parse().map_err(|_| Error::Parse {
            line,
            detail: format!("bad value {:?}", &record[3]),
        })?;
        dims.0 = dims.0.max(i + 1);
        dims.1 = dims.1.max(j + 1);
        dims.2 = dims.2.max(k + 1);
        entries.push((i, j, k, v));
    }
    if entries.is_empty() {
        return Err(Error::BadFormat("CSV tensor has no entries".into()));
    }
    let mut t = DenseTensor3::zeros(dims)?;
    for (i, j, k, v) in entries {
        let off = t.offset(i, j, k);
        t.values[off] = v;
    }
    if let Some(pos) = t.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: pos,
            value: t.values[pos],
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..24).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t = DenseTensor3::new((2, 3, 4), values).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"FPT3");
        assert_eq!(buf.len(), 4 + 24 + 24 * 8);
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let t = DenseTensor3::new((1, 1, 2), vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf[0] = b'X';
        assert!(read_tensor(&mut buf.as_slice()).is_err());
        buf[0] = b'F';
        buf.truncate(buf.len() - 3);
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_ingestion_with_header_and_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "i,j,k,value\n0,0,0,1.5\n1,2,0,-2.0\n").unwrap();
        let t = load_tensor_csv(&path).unwrap();
        assert_eq!(t.dims(), (2, 3, 1));
        assert_eq!(t.get(0, 0, 0), 1.5);
        assert_eq!(t.get(1, 2, 0), -2.0);
        assert_eq!(t.get(1, 1, 0), 0.0);

        std::fs::write(&path, "0,0,0,1.0\n0,0,oops\n").unwrap();
        match load_tensor_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
