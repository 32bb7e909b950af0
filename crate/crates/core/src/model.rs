//! Domain types shared by the whole pipeline: interaction records, page
//! metadata and the user x page biadjacency matrix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MatrixError {
    #[error("duplicate {axis} id `{id}`")]
    DuplicateId { axis: &'static str, id: String },
    #[error("entry ({row}, {col}) out of bounds for a {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid weight {value} at ({row}, {col}): {reason}")]
    InvalidWeight {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("dense input has a row of length {got}, expected {expected}")]
    RaggedRows { expected: usize, got: usize },
    #[error("degenerate input: no connected users/pages")]
    Degenerate,
    #[error("malformed sparse storage: {0}")]
    Malformed(String),
}

/// One (user, page, month) observation with its comment count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub page_id: String,
    pub month: u32,
    pub comments: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Science,
    Conspiracy,
    Unknown,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Science => "science",
            Category::Conspiracy => "conspiracy",
            Category::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "science" => Ok(Category::Science),
            "conspiracy" => Ok(Category::Conspiracy),
            "unknown" => Ok(Category::Unknown),
            other => Err(format!(
                "unknown category `{other}` (expected science, conspiracy or unknown)"
            )),
        }
    }
}

/// Per-page metadata: monthly post counts and a content category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageMeta {
    pub page_id: String,
    pub posts_per_month: BTreeMap<u32, u64>,
    pub category: Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    RawCounts,
    BinaryRca,
}

/// Compressed sparse row storage. Only nonzero entries are stored and column
/// indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CsrParts")]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct CsrParts {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<CsrParts> for SparseMatrix {
    type Error = MatrixError;

    fn try_from(p: CsrParts) -> Result<Self, MatrixError> {
        let bad = |m: &str| Err(MatrixError::Malformed(m.to_string()));
        if p.row_ptr.len() != p.rows + 1 || p.row_ptr[0] != 0 {
            return bad("row pointer length or origin");
        }
        if p.col_idx.len() != p.values.len() || p.row_ptr[p.rows] != p.values.len() {
            return bad("index and value lengths disagree");
        }
        for r in 0..p.rows {
            let (a, b) = (p.row_ptr[r], p.row_ptr[r + 1]);
            if a > b {
                return bad("row pointers decrease");
            }
            let cols = &p.col_idx[a..b];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.last().is_some_and(|&c| c >= p.cols) {
                return bad("column indices unsorted or out of range");
            }
        }
        if let Some(&v) = p.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(MatrixError::Malformed(format!(
                "stored value {v} is not a positive number"
            )));
        }
        Ok(Self {
            rows: p.rows,
            cols: p.cols,
            row_ptr: p.row_ptr,
            col_idx: p.col_idx,
            values: p.values,
        })
    }
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        let mut per_row: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); rows];
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(MatrixError::OutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() {
                return Err(MatrixError::InvalidWeight {
                    row: r,
                    col: c,
                    value: v,
                    reason: "not finite",
                });
            }
            if v < 0.0 {
                return Err(MatrixError::InvalidWeight {
                    row: r,
                    col: c,
                    value: v,
                    reason: "negative",
                });
            }
            *per_row[r].entry(c).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in per_row {
            for (c, v) in row {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Applies `f(row, col, value)` to every stored entry, one row per job.
    /// The sparsity pattern is kept unless `f` yields zeros, which are dropped.
    pub fn map_stored<F>(&self, exec: Execution, f: F) -> Result<Self, MatrixError>
    where
        F: Fn(usize, usize, f64) -> f64 + Sync + Send,
    {
        let rows: Vec<Vec<f64>> = par::map_range(self.rows, exec, |r| {
            self.row(r).map(|(c, x)| f(r, c, x)).collect()
        });
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Ok(Self {
                values,
                ..self.clone_pattern()
            });
        }
        let triplets = self.iter().zip(values).map(|((r, c, _), v)| (r, c, v));
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    fn clone_pattern(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(dense: &[Vec<f64>], cols: usize) -> Result<Self, MatrixError> {
        let mut triplets = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            if row.len() != cols {
                return Err(MatrixError::RaggedRows {
                    expected: cols,
                    got: row.len(),
                });
            }
            triplets.extend(row.iter().enumerate().map(|(c, &v)| (r, c, v)));
        }
        Self::from_triplets(dense.len(), cols, triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries of row `r` as `(col, value)` in increasing column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    /// All nonzero entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    /// Column sums, accumulated in row order.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, c, v) in self.iter() {
            sums[c] += v;
        }
        sums
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.iter() {
            dense[r][c] = v;
        }
        dense
    }

    /// Column-major view: for each column, its `(row, value)` entries in
    /// increasing row order.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.iter() {
            let slot = next[c];
            col_idx[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Keeps the listed rows and columns, in the given order.
    fn select(&self, keep_rows: &[usize], keep_cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in keep_cols.iter().enumerate() {
            col_map[old] = new;
        }
        let triplets = keep_rows.iter().enumerate().flat_map(|(new_r, &old_r)| {
            let col_map = &col_map;
            self.row(old_r).filter_map(move |(c, v)| {
                let nc = col_map[c];
                (nc != usize::MAX).then_some((new_r, nc, v))
            })
        });
        // indices come from valid rows and columns, so this cannot fail
        SparseMatrix::from_triplets(
            keep_rows.len(),
            keep_cols.len(),
            triplets.collect::<Vec<_>>(),
        )
        .expect("selection of a valid matrix")
    }
}

/// Weighted (raw comment counts, `V`) or binary (RCA, `M`) user x page matrix
/// with its id maps. Rows are users, columns are pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BiadjacencyParts")]
pub struct BiadjacencyMatrix {
    users: Vec<String>,
    pages: Vec<String>,
    kind: MatrixKind,
    weights: SparseMatrix,
}

#[derive(Deserialize)]
struct BiadjacencyParts {
    users: Vec<String>,
    pages: Vec<String>,
    kind: MatrixKind,
    weights: SparseMatrix,
}

impl TryFrom<BiadjacencyParts> for BiadjacencyMatrix {
    type Error = MatrixError;

    fn try_from(p: BiadjacencyParts) -> Result<Self, MatrixError> {
        Self::new(p.users, p.pages, p.kind, p.weights)
    }
}

impl BiadjacencyMatrix {
    pub fn new(
        users: Vec<String>,
        pages: Vec<String>,
        kind: MatrixKind,
        weights: SparseMatrix,
    ) -> Result<Self, MatrixError> {
        check_unique("user", &users)?;
        check_unique("page", &pages)?;
        if weights.rows() != users.len() || weights.cols() != pages.len() {
            return Err(MatrixError::OutOfBounds {
                row: weights.rows(),
                col: weights.cols(),
                rows: users.len(),
                cols: pages.len(),
            });
        }
        if kind == MatrixKind::BinaryRca {
            if let Some((r, c, v)) = weights.iter().find(|&(_, _, v)| v != 1.0) {
                return Err(MatrixError::InvalidWeight {
                    row: r,
                    col: c,
                    value: v,
                    reason: "binary matrix entries must be 0 or 1",
                });
            }
        }
        Ok(Self {
            users,
            pages,
            kind,
            weights,
        })
    }

    pub fn from_dense(
        users: Vec<String>,
        pages: Vec<String>,
        kind: MatrixKind,
        dense: &[Vec<f64>],
    ) -> Result<Self, MatrixError> {
        let weights = SparseMatrix::from_dense(dense, pages.len())?;
        Self::new(users, pages, kind, weights)
    }

    /// Convenience constructor with ids `u0..`, `p0..`.
    pub fn from_dense_anonymous(kind: MatrixKind, dense: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = dense.first().map_or(0, Vec::len);
        let users = (0..dense.len()).map(|i| format!("u{i}")).collect();
        let pages = (0..cols).map(|j| format!("p{j}")).collect();
        Self::from_dense(users, pages, kind, dense)
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn pages(&self) -> &[String] {
        &self.pages
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn weights(&self) -> &SparseMatrix {
        &self.weights
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_pages(&self) -> usize {
        self.pages.len()
    }

    pub fn get(&self, user: usize, page: usize) -> f64 {
        self.weights.get(user, page)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.weights.to_dense()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty() || self.pages.is_empty()
    }

    pub fn user_index(&self) -> HashMap<&str, usize> {
        self.users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect()
    }

    pub fn page_index(&self) -> HashMap<&str, usize> {
        self.pages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect()
    }

    /// True when every row and every column has at least one nonzero entry.
    pub fn is_pruned(&self) -> bool {
        let w = &self.weights;
        let rows_ok = (0..w.rows()).all(|r| w.row_nnz(r) > 0);
        let mut seen = vec![false; w.cols()];
        for (_, c, _) in w.iter() {
            seen[c] = true;
        }
        rows_ok && seen.into_iter().all(|s| s)
    }

    /// Restricts the matrix to the given row and column positions.
    pub fn select(&self, keep_users: &[usize], keep_pages: &[usize]) -> BiadjacencyMatrix {
        BiadjacencyMatrix {
            users: keep_users.iter().map(|&i| self.users[i].clone()).collect(),
            pages: keep_pages.iter().map(|&j| self.pages[j].clone()).collect(),
            kind: self.kind,
            weights: self.weights.select(keep_users, keep_pages),
        }
    }
}

fn check_unique(axis: &'static str, ids: &[String]) -> Result<(), MatrixError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MatrixError::DuplicateId {
                axis,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Users and pages removed by [`prune_matrix`], in removal order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneLog {
    pub removed_users: Vec<String>,
    pub removed_pages: Vec<String>,
    pub passes: usize,
}

impl PruneLog {
    pub fn is_empty(&self) -> bool {
        self.removed_users.is_empty() && self.removed_pages.is_empty()
    }
}

/// Removes all-zero rows and columns until none remain.
///
/// Accepts both matrix kinds: the raw-count mode of the engine has the same
/// requirement as the binary one.
pub fn prune_matrix(m: &BiadjacencyMatrix) -> Result<(BiadjacencyMatrix, PruneLog), MatrixError> {
    let mut log = PruneLog::default();
    let mut current = m.clone();
    loop {
        let w = current.weights();
        let mut col_nnz = vec![0usize; w.cols()];
        for (_, c, _) in w.iter() {
            col_nnz[c] += 1;
        }
        let keep_users: Vec<usize> = (0..w.rows()).filter(|&r| w.row_nnz(r) > 0).collect();
        let keep_pages: Vec<usize> = (0..w.cols()).filter(|&c| col_nnz[c] > 0).collect();
        if keep_users.len() == w.rows() && keep_pages.len() == w.cols() {
            break;
        }
        log.passes += 1;
        log.removed_users.extend(
            (0..w.rows())
                .filter(|r| w.row_nnz(*r) == 0)
                .map(|r| current.users[r].clone()),
        );
        log.removed_pages.extend(
            (0..w.cols())
                .filter(|c| col_nnz[*c] == 0)
                .map(|c| current.pages[c].clone()),
        );
        current = current.select(&keep_users, &keep_pages);
    }
    if current.is_empty() {
        return Err(MatrixError::Degenerate);
    }
    Ok((current, log))
}
