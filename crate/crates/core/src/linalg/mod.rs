//! Complex linear algebra on 2^n dimensional spaces.

mod density;
mod eig;
mod json;
mod matrix;

pub use density::{partial_trace_last, partial_trace_last_k, trace_inner, DensityMatrix, TOL_PSD, TOL_TRACE};
pub use eig::{
    complement_basis, hermitian_eig, hermitian_eigenvalues, projector_from, projector_from_sparse,
    top_eigvec_in_complement, ComplementEig, SparseVec, SpectralDecomposition,
};
pub use json::{matrix_from_json, matrix_to_json, Entries, MatrixJson, StorageKind};
pub use matrix::{
    inner, kron, kron_vec, norm, partial_trace_last_matrix, product_vector, ComplexMatrix, Storage, C64, TOL_HERM,
};
pub(crate) use matrix::{ONE, ZERO};
