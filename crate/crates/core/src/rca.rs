//! Balassa revealed comparative advantage and its binarization.
//!
//! For a raw count matrix `V` the advantage of user `u` on page `p` is the
//! user's share of comments on `p` divided by `p`'s share of all comments:
//!
//! ```text
//! RCA[u][p] = (V[u][p] / sum_q V[u][q]) / (sum_w V[w][p] / sum_wq V[w][q])
//! ```
//!
//! Binarizing at 1 yields the matrix `M` consumed by the ranking engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BiadjacencyMatrix, MatrixError, MatrixKind, SparseMatrix};
use crate::par::Execution;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RcaError {
    #[error("undefined RCA: zero marginal ({axis} `{id}` has no comments)")]
    ZeroMarginal { axis: &'static str, id: String },
    #[error("undefined RCA: empty matrix")]
    Empty,
    #[error("invalid RCA value {value} at ({row}, {col})")]
    InvalidValue { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Real-valued RCA matrix sharing the id maps of the matrix it came from.
/// Entries where `V` is zero are zero and not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaMatrix {
    pub users: Vec<String>,
    pub pages: Vec<String>,
    pub values: SparseMatrix,
}

impl RcaMatrix {
    pub fn get(&self, user: usize, page: usize) -> f64 {
        self.values.get(user, page)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.values.to_dense()
    }
}

pub fn rca_values(v: &BiadjacencyMatrix) -> Result<RcaMatrix, RcaError> {
    rca_values_with(v, Execution::Parallel)
}

/// Row-parallel RCA. Output is identical for both execution modes.
pub fn rca_values_with(v: &BiadjacencyMatrix, exec: Execution) -> Result<RcaMatrix, RcaError> {
    if v.is_empty() {
        return Err(RcaError::Empty);
    }
    let w = v.weights();
    let row_sums = w.row_sums();
    let col_sums = w.col_sums();
    if let Some(r) = row_sums.iter().position(|&s| s <= 0.0) {
        return Err(RcaError::ZeroMarginal {
            axis: "user",
            id: v.users()[r].clone(),
        });
    }
    if let Some(c) = col_sums.iter().position(|&s| s <= 0.0) {
        return Err(RcaError::ZeroMarginal {
            axis: "page",
            id: v.pages()[c].clone(),
        });
    }
    let total: f64 = row_sums.iter().sum();

    let values = w.map_stored(exec, |r, c, x| (x / row_sums[r]) / (col_sums[c] / total))?;
    Ok(RcaMatrix {
        users: v.users().to_vec(),
        pages: v.pages().to_vec(),
        values,
    })
}

/// `M[u][p] = 1` iff `RCA[u][p] >= threshold`. Entries where the RCA is an
/// implicit zero become 1 only when `threshold <= 0`.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> Result<BiadjacencyMatrix, RcaError> {
    let vals = &rca.values;
    if let Some((row, col, value)) = vals.iter().find(|&(_, _, x)| !x.is_finite() || x < 0.0) {
        return Err(RcaError::InvalidValue { row, col, value });
    }
    let triplets: Vec<(usize, usize, f64)> = if threshold <= 0.0 {
        (0..vals.rows())
            .flat_map(|r| (0..vals.cols()).map(move |c| (r, c, 1.0)))
            .collect()
    } else {
        vals.iter()
            .filter(|&(_, _, x)| x >= threshold)
            .map(|(r, c, _)| (r, c, 1.0))
            .collect()
    };
    let weights = SparseMatrix::from_triplets(vals.rows(), vals.cols(), triplets)?;
    Ok(BiadjacencyMatrix::new(
        rca.users.clone(),
        rca.pages.clone(),
        MatrixKind::BinaryRca,
        weights,
    )?)
}
