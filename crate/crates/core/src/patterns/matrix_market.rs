//! Matrix Market coordinate files, structure only.
//!
//! Accepted banner: `%%MatrixMarket matrix coordinate {pattern|real|integer}
//! {general|symmetric}`. Values are ignored; indices are converted to
//! zero-based, symmetric off-diagonal entries are mirrored, and duplicate
//! coordinates are merged.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, RmaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Pattern,
    Real,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Sparsity structure of a matrix in general (expanded) form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    coords: BTreeSet<(usize, usize)>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        coords: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let coords: BTreeSet<_> = coords.into_iter().collect();
        if let Some(&(i, j)) = coords.iter().find(|&&(i, j)| i >= n_rows || j >= n_cols) {
            return Err(RmaError::Pattern(format!(
                "entry ({i}, {j}) outside {n_rows}x{n_cols} matrix"
            )));
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            coords,
        })
    }

    pub fn nnz(&self) -> usize {
        self.coords.len()
    }

    /// Zero-based coordinates in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.coords.iter().copied()
    }

    /// Writes the matrix as `coordinate pattern general`.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate pattern general\n");
        let _ = writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for (i, j) in self.coords() {
            let _ = writeln!(out, "{} {}", i + 1, j + 1);
        }
        out
    }
}

fn err(line: usize, message: impl Into<String>) -> RmaError {
    RmaError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_banner(line: &str, lineno: usize) -> Result<(Field, Symmetry)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.first() != Some(&"%%MatrixMarket") {
        return Err(err(lineno, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 {
        return Err(err(
            lineno,
            format!("banner has {} tokens, expected 5", tokens.len()),
        ));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix") {
        return Err(err(lineno, format!("unsupported object '{}'", tokens[1])));
    }
    if !tokens[2].eq_ignore_ascii_case("coordinate") {
        return Err(err(lineno, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].to_ascii_lowercase().as_str() {
        "pattern" => Field::Pattern,
        "real" => Field::Real,
        "integer" => Field::Integer,
        other => return Err(err(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].to_ascii_lowercase().as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(lineno, format!("unsupported symmetry '{other}'"))),
    };
    Ok((field, symmetry))
}

fn parse_usize(tok: &str, lineno: usize, what: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| err(lineno, format!("invalid {what} '{tok}'")))
}

pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lineno, banner) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let (field, symmetry) = parse_banner(banner, lineno)?;
    let value_tokens = usize::from(field != Field::Pattern);

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = body
        .next()
        .ok_or_else(|| err(lineno + 1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(err(size_line, "size line must be 'rows cols nnz'"));
    }
    let n_rows = parse_usize(dims[0], size_line, "row count")?;
    let n_cols = parse_usize(dims[1], size_line, "column count")?;
    let declared = parse_usize(dims[2], size_line, "entry count")?;
    if symmetry == Symmetry::Symmetric && n_rows != n_cols {
        return Err(err(size_line, "symmetric matrix must be square"));
    }

    let mut coords = BTreeSet::new();
    let mut seen = 0usize;
    let mut last_line = size_line;
    for (ln, line) in body {
        last_line = ln;
        seen += 1;
        if seen > declared {
            return Err(err(ln, format!("more than the declared {declared} entries")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 + value_tokens {
            return Err(err(
                ln,
                format!("expected {} tokens, found {}", 2 + value_tokens, toks.len()),
            ));
        }
        let i = parse_usize(toks[0], ln, "row index")?;
        let j = parse_usize(toks[1], ln, "column index")?;
        if i == 0 || i > n_rows || j == 0 || j > n_cols {
            return Err(err(
                ln,
                format!("index ({i}, {j}) outside 1..={n_rows} x 1..={n_cols}"),
            ));
        }
        if let Some(v) = toks.get(2) {
            let ok = match field {
                Field::Integer => v.parse::<i64>().is_ok(),
                _ => v.parse::<f64>().is_ok(),
            };
            if !ok {
                return Err(err(ln, format!("invalid value '{v}'")));
            }
        }
        coords.insert((i - 1, j - 1));
        if symmetry == Symmetry::Symmetric && i != j {
            coords.insert((j - 1, i - 1));
        }
    }
    if seen < declared {
        return Err(err(
            last_line + 1,
            format!("expected {declared} entries, found {seen}"),
        ));
    }
    Ok(SparseMatrix {
        n_rows,
        n_cols,
        coords,
    })
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}
