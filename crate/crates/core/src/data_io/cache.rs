//! Binary dataset cache: magic `AVRA1`, little-endian `u64` n, d, nnz, then
//! the CSR arrays (indptr, indices, value bits) and finally the label bits.

use std::io::{Read, Write};

use crate::linalg::SparseMatrix;
use crate::problem::Dataset;

use super::DataError;

pub const CACHE_MAGIC: &[u8; 5] = b"AVRA1";

pub fn write_cache<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    let w = ds.features();
    out.write_all(CACHE_MAGIC)?;
    for v in [w.rows(), w.cols(), w.nnz()] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for &p in w.indptr() {
        out.write_all(&(p as u64).to_le_bytes())?;
    }
    for &j in w.indices() {
        out.write_all(&(j as u64).to_le_bytes())?;
    }
    for &v in w.values() {
        out.write_all(&v.to_bits().to_le_bytes())?;
    }
    for &b in ds.labels().iter() {
        out.write_all(&b.to_bits().to_le_bytes())?;
    }
    out.flush()
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DataError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => DataError::Cache("truncated cache file".into()),
        _ => DataError::Io(e),
    })?;
    Ok(u64::from_le_bytes(buf))
}

fn read_usize<R: Read>(r: &mut R) -> Result<usize, DataError> {
    usize::try_from(read_u64(r)?).map_err(|_| DataError::Cache("value does not fit in usize".into()))
}

fn read_vec<R: Read, T>(r: &mut R, len: usize, f: impl Fn(u64) -> Result<T, DataError>) -> Result<Vec<T>, DataError> {
    // Capacity is bounded so a corrupt header cannot force a huge allocation.
    let mut out = Vec::with_capacity(len.min(1 << 20));
    for _ in 0..len {
        out.push(f(read_u64(r)?)?);
    }
    Ok(out)
}

pub fn read_cache<R: Read>(mut input: R) -> Result<Dataset, DataError> {
    let mut magic = [0u8; 5];
    input
        .read_exact(&mut magic)
        .map_err(|_| DataError::Cache("missing magic bytes".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(DataError::Cache(format!("bad magic {magic:?}")));
    }
    let n = read_usize(&mut input)?;
    let d = read_usize(&mut input)?;
    let nnz = read_usize(&mut input)?;
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| DataError::Cache("index does not fit in usize".into()));
    let indptr = read_vec(&mut input, n.checked_add(1).ok_or_else(|| DataError::Cache("bad n".into()))?, to_usize)?;
    let indices = read_vec(&mut input, nnz, to_usize)?;
    let values = read_vec(&mut input, nnz, |v| Ok(f64::from_bits(v)))?;
    let labels = read_vec(&mut input, n, |v| Ok(f64::from_bits(v)))?;
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(DataError::Cache("trailing bytes after labels".into()));
    }
    let features = SparseMatrix::from_csr(n, d, indptr, indices, values)?;
    if features.nnz() != nnz {
        return Err(DataError::Cache("cache contains explicit zeros".into()));
    }
    Ok(Dataset::new(features, labels.into())?)
}
