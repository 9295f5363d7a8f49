//! LIBSVM ingestion, binary caching and the fused-lasso penalty matrix.

mod cache;
mod graph;
mod libsvm;

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::linalg::{DenseVector, LinalgError};
use crate::problem::{Dataset, ProblemError};

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use graph::{
    build_feature_graph, build_penalty_matrix, correlation_matrix, FeatureGraph, DEFAULT_GRAPH_THRESHOLD,
    MAX_GRAPH_FEATURES,
};
pub use libsvm::{parse_libsvm, write_libsvm, ParseOptions};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("dimension override {requested} is smaller than the largest feature index {max_index}")]
    DimensionOverride { requested: usize, max_index: usize },
    #[error("labels: {0}")]
    Labels(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("feature graph: {0}")]
    Graph(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl DataError {
    fn parse(line: usize, column: usize, message: String) -> Self {
        Self::Parse { line, column, message }
    }
}

/// Maps labels to `±1`. Labels already in `{−1, +1}` are kept; any other
/// pair of distinct values maps the smaller to `−1` and the larger to `+1`.
pub fn binarize_labels(labels: &[f64]) -> Result<DenseVector, DataError> {
    let mut distinct: Vec<f64> = Vec::new();
    for &b in labels {
        if !distinct.contains(&b) {
            if distinct.len() == 2 {
                return Err(DataError::Labels(format!(
                    "more than two distinct labels ({}, {}, {b})",
                    distinct[0], distinct[1]
                )));
            }
            distinct.push(b);
        }
    }
    if distinct.iter().all(|&b| b == 1.0 || b == -1.0) {
        return Ok(labels.into());
    }
    if distinct.len() < 2 {
        return Err(DataError::Labels(format!("single label value {} cannot be mapped to ±1", distinct[0])));
    }
    let hi = distinct[0].max(distinct[1]);
    Ok(labels.iter().map(|&b| if b == hi { 1.0 } else { -1.0 }).collect())
}

/// Copy of `ds` with binarized labels.
pub fn with_binary_labels(ds: &Dataset) -> Result<Dataset, DataError> {
    Ok(Dataset::new(ds.features().clone(), binarize_labels(ds.labels())?)?)
}

/// Loads a dataset from a binary cache (detected by its magic bytes) or a
/// LIBSVM text file.
pub fn load_dataset(path: &Path, options: ParseOptions) -> Result<Dataset, DataError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut head = [0u8; 5];
    let got = read_prefix(&mut reader, &mut head)?;
    let chained = head[..got].chain(reader);
    if got == 5 && &head == CACHE_MAGIC {
        let ds = read_cache(chained)?;
        if let Some(d) = options.dim_override {
            if d != ds.n_features() {
                return Err(DataError::DimensionOverride { requested: d, max_index: ds.n_features() });
            }
        }
        Ok(ds)
    } else {
        parse_libsvm(BufReader::new(chained), options)
    }
}

fn read_prefix<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let k = r.read(&mut buf[filled..])?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize() {
        assert_eq!(binarize_labels(&[1.0, -1.0, 1.0]).unwrap().as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(binarize_labels(&[2.0, 1.0, 2.0]).unwrap().as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(binarize_labels(&[0.0, 1.0]).unwrap().as_slice(), &[-1.0, 1.0]);
        assert_eq!(binarize_labels(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 1.0]);
        assert!(binarize_labels(&[1.0, 2.0, 3.0]).is_err());
        assert!(binarize_labels(&[0.0, 0.0]).is_err());
    }
}
