use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest `n` accepted by the dense routines.
pub const DENSE_LIMIT: usize = 5000;

fn guard(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::input("matrix must be square"));
    }
    if a.nrows() > DENSE_LIMIT {
        return Err(Error::input(format!(
            "dense routines are limited to n <= {DENSE_LIMIT}, got {}",
            a.nrows()
        )));
    }
    Ok(())
}

/// Textbook dense Cholesky, used as an oracle and for the base GP.
#[derive(Clone, Debug)]
pub struct DenseCholesky {
    chol: Cholesky<f64, Dyn>,
}

impl DenseCholesky {
    pub fn n(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n() {
            return Err(Error::input("rhs length differs from matrix size"));
        }
        Ok(self
            .chol
            .solve(&DVector::from_column_slice(b))
            .as_slice()
            .to_vec())
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inv_quad_form(&self, b: &[f64]) -> Result<f64> {
        if b.len() != self.n() {
            return Err(Error::input("rhs length differs from matrix size"));
        }
        let l = self.chol.l();
        let y = l
            .solve_lower_triangular(&DVector::from_column_slice(b))
            .ok_or_else(|| Error::Definiteness("singular triangular factor".into()))?;
        Ok(y.norm_squared())
    }
}

pub fn dense_cholesky(a: &DMatrix<f64>) -> Result<DenseCholesky> {
    guard(a)?;
    Cholesky::new(a.clone())
        .map(|chol| DenseCholesky { chol })
        .ok_or_else(|| {
            Error::Definiteness("dense Cholesky failed: matrix is not positive definite".into())
        })
}

pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    dense_cholesky(a)?.solve(b)
}

pub fn dense_logdet(a: &DMatrix<f64>) -> Result<f64> {
    Ok(dense_cholesky(a)?.logdet())
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    guard(a)?;
    if a.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let sym = (a + a.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym).eigenvalues.min())
}
