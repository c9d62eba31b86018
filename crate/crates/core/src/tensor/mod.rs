//! Dense and sparse matrices plus the numerical kernels shared by every stage.

mod dense;
mod linalg;
mod sparse;

pub use dense::DenseMatrix;
pub(crate) use dense::{axpy_slice, ROW_CHUNK};
pub use linalg::{
    dense_ridge_solve, gaussian_matrix, orthonormalize, ridge_solve, sym_eig, sym_eig_topk,
    RidgeMethod, RidgeSystem, DIRECT_SOLVE_MAX_DIM, RANK_TOL, RIDGE_TOL,
};
pub use sparse::SparseMatrix;
