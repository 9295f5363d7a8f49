use std::io::{BufRead, Write};

use crate::linalg::SparseMatrix;
use crate::problem::Dataset;

use super::DataError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Number of columns. Defaults to the largest index seen; an override
    /// smaller than that is an error.
    pub dim_override: Option<usize>,
}

/// Parses `label idx:val idx:val …` lines with 1-based, strictly increasing
/// indices. Blank lines are skipped; explicit zeros are dropped.
pub fn parse_libsvm<R: BufRead>(mut source: R, options: ParseOptions) -> Result<Dataset, DataError> {
    let mut labels = Vec::new();
    let mut indptr = vec![0usize];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut max_index = 0usize;
    let mut line = String::new();
    let mut line_no = 0usize;

    loop {
        line.clear();
        if source.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let mut tokens = tokens_with_columns(&line);
        let Some((label_col, label_tok)) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| DataError::parse(line_no, label_col, format!("invalid label {label_tok:?}")))?;
        let mut prev: Option<usize> = None;
        for (col, tok) in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| DataError::parse(line_no, col, format!("expected index:value, found {tok:?}")))?;
            let idx: usize = idx_str
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| DataError::parse(line_no, col, format!("invalid feature index {idx_str:?}")))?;
            let val: f64 = val_str
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    DataError::parse(line_no, col + idx_str.len() + 1, format!("invalid feature value {val_str:?}"))
                })?;
            if prev.is_some_and(|p| idx <= p) {
                return Err(DataError::parse(
                    line_no,
                    col,
                    format!("feature index {idx} does not increase (previous {})", prev.unwrap_or(0)),
                ));
            }
            prev = Some(idx);
            max_index = max_index.max(idx);
            if val != 0.0 {
                indices.push(idx - 1);
                values.push(val);
            }
        }
        labels.push(label);
        indptr.push(indices.len());
    }

    if labels.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let d = match options.dim_override {
        Some(d) if d < max_index => {
            return Err(DataError::DimensionOverride { requested: d, max_index });
        }
        Some(d) => d,
        None => max_index,
    };
    if d == 0 {
        return Err(DataError::EmptyDataset);
    }
    let features = SparseMatrix::from_csr(labels.len(), d, indptr, indices, values)?;
    Ok(Dataset::new(features, labels.into())?)
}

/// Whitespace-separated tokens with their 1-based byte column.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0usize;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let col = offset + start + 1;
        let tok = &tail[..len];
        offset += start + len;
        rest = &tail[len..];
        Some((col, tok))
    })
}

/// Writes a dataset in LIBSVM format. Values use the shortest decimal form
/// that parses back to the same bits.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    let w = ds.features();
    for i in 0..ds.n_samples() {
        write!(out, "{}", ds.labels()[i])?;
        let (idx, val) = w.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()
}
