//! Dense real linear algebra: matrices, the Jacobi eigensolver, kernels,
//! pseudoinverses and block/Kronecker utilities.

pub mod block;
pub mod decomp;
pub mod eigen;
mod matrix;

pub use block::{canonical_shuffle, canonical_unshuffle, kron, kron_sym, schur_complement_psd_check, SchurDiagnostics};
pub use decomp::{kernel_basis, nullspace, pinv, KernelBasis, DEFAULT_RANK_TOL};
pub use eigen::{min_eigenvalue, sym_eigen, SymEigen};
pub use matrix::{dot, norm, symmetric_basis, Matrix, SymMatrix};
