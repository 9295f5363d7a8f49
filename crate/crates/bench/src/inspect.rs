use std::fmt;
use std::path::Path;

use asvrg_core::data_io::{load_dataset, ParseOptions};
use asvrg_core::problem::{smoothness_constants, LossKind};

use crate::BenchError;

/// Size and smoothness constants of a dataset under both loss conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub lf_squared: f64,
    pub lq_squared: f64,
    pub lf_logistic: f64,
    pub lq_logistic: f64,
}

pub fn inspect_dataset(path: &Path, options: ParseOptions) -> Result<DatasetSummary, BenchError> {
    let ds = load_dataset(path, options)?;
    let sq = smoothness_constants(&ds, LossKind::Squared)?;
    let lg = smoothness_constants(&ds, LossKind::Logistic)?;
    Ok(DatasetSummary {
        n: ds.n_samples(),
        d: ds.n_features(),
        nnz: ds.features().nnz(),
        lf_squared: sq.lf,
        lq_squared: sq.lq,
        lf_logistic: lg.lf,
        lq_logistic: lg.lq,
    })
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "d = {}", self.d)?;
        writeln!(f, "nnz = {}", self.nnz)?;
        writeln!(f, "L_f (squared) = {:.6}", self.lf_squared)?;
        writeln!(f, "L_f (logistic) = {:.6}", self.lf_logistic)?;
        writeln!(f, "L_Q (squared) = {:.6}", self.lq_squared)?;
        write!(f, "L_Q (logistic) = {:.6}", self.lq_logistic)
    }
}
