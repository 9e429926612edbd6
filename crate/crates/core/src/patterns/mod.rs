//! Communication patterns: who sends how many bytes to whom.

mod fill;
mod matrix_market;
mod random;

pub use fill::{encode_rank, fill_send, validate_recv, Mismatch};
pub use matrix_market::{parse_matrix_market, read_matrix_market, Field, SparseMatrix, Symmetry};
pub use random::{random_exchange, random_sparse_matrix, RandomExchange};

use crate::collectives::ExchangeSpec;
use crate::error::{Result, RmaError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Uniform { msg_size_bytes: usize },
    Matrix { name: String, rows_per_block: usize },
    Explicit,
}

/// An R x R byte-count matrix: `counts_bytes[r][p]` is what rank `r` sends
/// to rank `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    counts_bytes: Vec<Vec<usize>>,
    elem_size: usize,
    provenance: Provenance,
}

impl Pattern {
    pub fn from_counts(
        counts_bytes: Vec<Vec<usize>>,
        elem_size: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if elem_size == 0 {
            return Err(RmaError::Pattern("element size must be positive".into()));
        }
        let n = counts_bytes.len();
        if n == 0 {
            return Err(RmaError::Pattern("pattern needs at least one rank".into()));
        }
        for (r, row) in counts_bytes.iter().enumerate() {
            if row.len() != n {
                return Err(RmaError::Pattern(format!(
                    "row {r} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(p) = row.iter().position(|c| c % elem_size != 0) {
                return Err(RmaError::Pattern(format!(
                    "count {} bytes from {r} to {p} is not a multiple of element size {elem_size}",
                    row[p]
                )));
            }
        }
        Ok(Pattern {
            counts_bytes,
            elem_size,
            provenance,
        })
    }

    pub fn ranks(&self) -> usize {
        self.counts_bytes.len()
    }

    pub fn elem_size(&self) -> usize {
        self.elem_size
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn counts_bytes(&self) -> &[Vec<usize>] {
        &self.counts_bytes
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match &self.provenance {
            Provenance::Uniform { .. } => "uniform".into(),
            Provenance::Matrix { name, .. } => name.clone(),
            Provenance::Explicit => "explicit".into(),
        }
    }

    pub fn send_bytes(&self, rank: usize) -> usize {
        self.counts_bytes[rank].iter().sum()
    }

    pub fn recv_bytes(&self, rank: usize) -> usize {
        self.counts_bytes.iter().map(|row| row[rank]).sum()
    }

    pub fn total_bytes(&self) -> usize {
        self.counts_bytes.iter().flatten().sum()
    }

    /// Rank `rank`'s argument set. Both sides are packed in rank order:
    /// displacements are exclusive prefix sums of row `rank` (send) and
    /// column `rank` (receive). Buffers are zeroed.
    pub fn slice(&self, rank: usize) -> ExchangeSpec {
        let es = self.elem_size;
        let sendcounts: Vec<usize> = self.counts_bytes[rank].iter().map(|b| b / es).collect();
        let recvcounts: Vec<usize> = self.counts_bytes.iter().map(|row| row[rank] / es).collect();
        let sdispls = exclusive_prefix_sum(&sendcounts);
        let rdispls = exclusive_prefix_sum(&recvcounts);
        ExchangeSpec::with_buffers(sendcounts, sdispls, recvcounts, rdispls, es)
    }

    pub fn with_name(mut self, label: impl Into<String>) -> Self {
        if let Provenance::Matrix { name, .. } = &mut self.provenance {
            *name = label.into();
        }
        self
    }
}

pub fn exclusive_prefix_sum(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .scan(0, |acc, &c| {
            let d = *acc;
            *acc += c;
            Some(d)
        })
        .collect()
}

/// Every rank sends `msg_size_bytes` to every rank.
pub fn uniform_pattern(ranks: usize, msg_size_bytes: usize, elem_size: usize) -> Result<Pattern> {
    if elem_size == 0 || !msg_size_bytes.is_multiple_of(elem_size) {
        return Err(RmaError::Pattern(format!(
            "message size {msg_size_bytes} is not a multiple of element size {elem_size}"
        )));
    }
    Pattern::from_counts(
        vec![vec![msg_size_bytes; ranks]; ranks],
        elem_size,
        Provenance::Uniform { msg_size_bytes },
    )
}

/// Derives an exchange from a sparsity structure. Rows are split into
/// `ranks` contiguous blocks of `ceil(n / ranks)` rows, columns use the same
/// map, and `counts[r][p]` is `elem_size` times the number of nonzeros in
/// block `(r, p)`.
pub fn matrix_pattern(m: &SparseMatrix, ranks: usize, elem_size: usize) -> Result<Pattern> {
    if m.n_rows != m.n_cols {
        return Err(RmaError::Pattern(format!(
            "matrix is {}x{}; patterns need a square matrix",
            m.n_rows, m.n_cols
        )));
    }
    if ranks == 0 || ranks > m.n_rows {
        return Err(RmaError::Pattern(format!(
            "cannot split {} rows over {ranks} ranks",
            m.n_rows
        )));
    }
    let block = m.n_rows.div_ceil(ranks);
    let mut counts = vec![vec![0usize; ranks]; ranks];
    for (i, j) in m.coords() {
        counts[i / block][j / block] += elem_size;
    }
    Pattern::from_counts(
        counts,
        elem_size,
        Provenance::Matrix {
            name: "matrix".into(),
            rows_per_block: block,
        },
    )
}
