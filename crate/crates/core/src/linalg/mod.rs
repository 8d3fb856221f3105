//! Small dense linear-algebra kernel: row-major matrices, Householder QR,
//! Cholesky, Jacobi SVD and symmetric eigensolver, and spectral norms.

mod decomp;
mod matrix;

pub use decomp::{
    cholesky, complete_orthonormal, ky_fan, leading_sign, norms, orthonormalize_against,
    solve_lower, solve_lower_transpose, svd_oracle, sym_eigen, sym_pinv, thin_qr, Cholesky, Norms,
    Qr, Svd, SymEigen,
};
pub use matrix::{dot, norm2, Matrix};
