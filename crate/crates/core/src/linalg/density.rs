use std::sync::OnceLock;

use super::eig::hermitian_eigenvalues;
use super::matrix::{kron, partial_trace_last_matrix, ComplexMatrix, C64, TOL_HERM};
use crate::error::{domain, Result};

pub const TOL_TRACE: f64 = 1e-9;
pub const TOL_PSD: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace matrix on `qubits` qubits.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    qubits: usize,
    matrix: ComplexMatrix,
    eigenvalues: OnceLock<Vec<f64>>,
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.qubits == other.qubits && self.matrix == other.matrix
    }
}

fn qubits_of(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return domain(format!("dimension {dim} is not a power of two"));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl DensityMatrix {
    /// Validates all density-matrix invariants.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return domain("density matrix must be square");
        }
        let qubits = qubits_of(matrix.rows())?;
        let dev = matrix.hermitian_deviation();
        if dev > TOL_HERM {
            return domain(format!("density matrix not Hermitian (deviation {dev:.3e})"));
        }
        let matrix = matrix.assume_hermitian();
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return domain(format!("density matrix trace {tr} differs from 1"));
        }
        let vals = hermitian_eigenvalues(&matrix)?;
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -TOL_PSD {
            return domain(format!("density matrix has negative eigenvalue {min:.3e}"));
        }
        Ok(DensityMatrix { qubits, matrix, eigenvalues: OnceLock::from(vals) })
    }

    /// Wraps a matrix known to be a density matrix by construction.
    pub(crate) fn trusted(matrix: ComplexMatrix) -> Self {
        let qubits = matrix.rows().trailing_zeros() as usize;
        debug_assert!(matrix.rows().is_power_of_two());
        DensityMatrix { qubits, matrix: matrix.assume_hermitian(), eigenvalues: OnceLock::new() }
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1usize << qubits;
        Self::trusted(ComplexMatrix::diagonal_real(&vec![1.0 / d as f64; d]))
    }

    /// |i⟩⟨i| on `qubits` qubits.
    pub fn basis_state(qubits: usize, index: usize) -> Result<Self> {
        let d = 1usize << qubits;
        if index >= d {
            return domain(format!("basis index {index} out of range for {qubits} qubits"));
        }
        let mut w = vec![0.0; d];
        w[index] = 1.0;
        Ok(Self::trusted(ComplexMatrix::diagonal_real(&w)))
    }

    /// Diagonal state with the given weights.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        qubits_of(weights.len())?;
        if let Some(w) = weights.iter().find(|w| **w < -TOL_PSD || !w.is_finite()) {
            return domain(format!("negative or non-finite weight {w}"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > TOL_TRACE {
            return domain(format!("weights sum to {s}"));
        }
        Ok(Self::trusted(ComplexMatrix::diagonal_real(weights)))
    }

    /// Pure state |v⟩⟨v| for a unit vector v.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let n = super::matrix::norm(v);
        if (n - 1.0).abs() > 1e-9 {
            return domain(format!("state vector has norm {n}"));
        }
        qubits_of(v.len())?;
        Ok(Self::trusted(ComplexMatrix::outer(v)))
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Real parts of the diagonal.
    pub fn diagonal_weights(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|x| x.re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix.is_diagonal()
    }

    /// Eigenvalues in descending order, computed once.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if let Some(v) = self.eigenvalues.get() {
            return Ok(v.clone());
        }
        let v = hermitian_eigenvalues(&self.matrix)?;
        Ok(self.eigenvalues.get_or_init(|| v).clone())
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self::trusted(kron(&self.matrix, &other.matrix)?))
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Traces out the last qubit.
pub fn partial_trace_last(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.qubits == 0 {
        return domain("cannot trace out a qubit from a 0-qubit state");
    }
    let m = partial_trace_last_matrix(&rho.matrix)?;
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TOL_TRACE {
        return domain(format!("partial trace has trace {tr}"));
    }
    Ok(DensityMatrix::trusted(m))
}

/// Applies [`partial_trace_last`] `k` times.
pub fn partial_trace_last_k(rho: &DensityMatrix, k: usize) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    for _ in 0..k {
        out = partial_trace_last(&out)?;
    }
    Ok(out)
}

/// Re Tr(ρ·p); the imaginary part must vanish within 1e-9.
pub fn trace_inner(rho: &DensityMatrix, p: &ComplexMatrix) -> Result<f64> {
    if p.rows() != rho.dim() || p.cols() != rho.dim() {
        return domain(format!("dimension mismatch: state {} vs operator {}x{}", rho.dim(), p.rows(), p.cols()));
    }
    if !p.hermitian_flag() && p.hermitian_deviation() > TOL_HERM {
        return domain("operator is not Hermitian");
    }
    let t = rho.matrix.trace_product(p)?;
    if t.im.abs() > 1e-9 {
        return domain(format!("trace has imaginary part {:.3e}", t.im));
    }
    Ok(t.re)
}
