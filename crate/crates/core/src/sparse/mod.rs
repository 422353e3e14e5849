//! Sparse symmetric storage, MINRES, sparse Cholesky and the dense oracle.

mod cholesky;
mod csr;
mod dense;
mod minres;
mod mmio;
mod ordering;
mod triplet;

pub use cholesky::{
    sparse_logdet, sparse_logdet_with, FactorReport, LogDet, SparseCholesky, JITTER_MAX,
    JITTER_START,
};
pub use csr::CsrMatrix;
pub use dense::{
    dense_cholesky, dense_logdet, dense_solve, min_eigenvalue, DenseCholesky, DENSE_LIMIT,
};
pub use minres::{minres, LinearOperator, MinresOptions, SolveReport};
pub use mmio::{read_matrix_market, write_matrix_market};
pub use ordering::{inverse_permutation, minimum_degree, reverse_cuthill_mckee, Ordering};
pub use triplet::{sparsify_block, to_csr, Triplet, TripletMatrix};
