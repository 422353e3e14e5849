use nalgebra::DMatrix;

use super::triplet::{Triplet, TripletMatrix};
use crate::error::{Error, Result};

/// Square compressed-row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_parts(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 {
            return Err(Error::input(
                "row offsets must have length n + 1 and start at 0",
            ));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("row offsets must be nondecreasing"));
        }
        let nnz = row_offsets[n];
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::input("column/value arrays do not match row offsets"));
        }
        for i in 0..n {
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.iter().any(|&c| c >= n) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!(
                    "row {i} has unsorted or out-of-range columns"
                )));
            }
        }
        Ok(CsrMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = CsrMatrix::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::input("matrix must be square"));
        }
        let mut t = TripletMatrix::new(a.nrows());
        t.extend(super::triplet::sparsify_block(a, 0, 0, 0.0))?;
        t.to_csr()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.n as f64 * self.n as f64)
        }
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |p| v[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::input(format!(
                "vector length {} for an n = {} matrix",
                x.len(),
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without length checks.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for p in s..e {
                acc += self.values[p] * x[self.col_indices[p]];
            }
            *yi = acc;
        }
    }

    pub fn to_triplets(&self) -> TripletMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            entries.extend(
                c.iter()
                    .zip(v)
                    .map(|(&col, &value)| Triplet { row: i, col, value }),
            );
        }
        TripletMatrix::from_entries(self.n, entries).expect("CSR entries are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[(i, j)] = x;
            }
        }
        d
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, _) = self.row(i);
            c.iter().all(|&j| self.row(j).0.binary_search(&i).is_ok())
        })
    }

    /// Exact value symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &x)| {
                let (cj, vj) = self.row(j);
                cj.binary_search(&i).is_ok_and(|p| vj[p] == x)
            })
        })
    }

    /// Little-endian serialization of the three arrays; equal bytes means
    /// bit-identical matrices.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (1 + self.row_offsets.len() + 2 * self.nnz()));
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for &o in &self.row_offsets {
            out.extend_from_slice(&(o as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out
    }
}
