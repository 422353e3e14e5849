use nalgebra::DMatrix;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Coordinate-format matrix, used only while building and shipping blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<Triplet>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        TripletMatrix {
            n,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(n: usize, entries: Vec<Triplet>) -> Result<Self> {
        let mut t = TripletMatrix::new(n);
        t.extend(entries)?;
        Ok(t)
    }

    /// Adds entries; exact zeros are skipped.
    pub fn extend(&mut self, entries: impl IntoIterator<Item = Triplet>) -> Result<()> {
        for e in entries {
            if e.row >= self.n || e.col >= self.n {
                return Err(Error::input(format!(
                    "triplet ({}, {}) outside a {} x {} matrix",
                    e.row, e.col, self.n, self.n
                )));
            }
            if e.value != 0.0 {
                self.entries.push(e);
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Triplet] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_csr(&self) -> Result<CsrMatrix> {
        to_csr(self)
    }

    /// Entries ordered by `(row, col)`.
    pub fn sorted(mut self) -> Self {
        self.entries.sort_by_key(|e| (e.row, e.col));
        self
    }
}

/// Emits `(i + row_offset, j + col_offset, v)` for every entry of `block`
/// with `|v| > drop_tol`; with the default tolerance of zero only exact
/// zeros are dropped.
pub fn sparsify_block(
    block: &DMatrix<f64>,
    row_offset: usize,
    col_offset: usize,
    drop_tol: f64,
) -> Vec<Triplet> {
    let mut out = Vec::new();
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            let v = block[(i, j)];
            if v != 0.0 && v.abs() > drop_tol {
                out.push(Triplet {
                    row: i + row_offset,
                    col: j + col_offset,
                    value: v,
                });
            }
        }
    }
    out
}

/// Row-bucketed conversion. Duplicate coordinates are an error: they mean
/// two blocks covered the same entry.
pub fn to_csr(t: &TripletMatrix) -> Result<CsrMatrix> {
    let n = t.n;
    let mut counts = vec![0usize; n + 1];
    for e in &t.entries {
        counts[e.row + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let row_offsets = counts.clone();
    let mut next = counts;
    let nnz = t.entries.len();
    let mut cols = vec![0usize; nnz];
    let mut vals = vec![0.0; nnz];
    for e in &t.entries {
        let p = next[e.row];
        cols[p] = e.col;
        vals[p] = e.value;
        next[e.row] += 1;
    }
    let mut perm: Vec<usize> = Vec::new();
    for i in 0..n {
        let (s, e) = (row_offsets[i], row_offsets[i + 1]);
        if cols[s..e].windows(2).all(|w| w[0] < w[1]) {
            continue;
        }
        perm.clear();
        perm.extend(s..e);
        perm.sort_by_key(|&p| cols[p]);
        let c: Vec<usize> = perm.iter().map(|&p| cols[p]).collect();
        let v: Vec<f64> = perm.iter().map(|&p| vals[p]).collect();
        if let Some(w) = c.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Assembly(format!(
                "duplicate entry at ({i}, {})",
                w[0]
            )));
        }
        cols[s..e].copy_from_slice(&c);
        vals[s..e].copy_from_slice(&v);
    }
    CsrMatrix::from_parts(n, row_offsets, cols, vals)
}
