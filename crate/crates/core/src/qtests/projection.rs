use num_bigint::BigUint;
use num_traits::Zero;

use crate::binom::{binom_row, ratio_pow2, weighted_binomial_sum};
use crate::error::{capacity, domain, invariant, QrlError, Result};
use crate::limits::limits;
use crate::linalg::{kron, trace_inner, ComplexMatrix, TOL_HERM};
use crate::states::{Generator, StatePrefix};

pub const TOL_IDEMPOTENT: f64 = 1e-8;

/// How a special projection is stored.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionRepr {
    Explicit(ComplexMatrix),
    /// Tensor product of the blocks, first block most significant.
    Factored(Vec<SpecialProjection>),
    /// Diagonal projector onto strings whose count of zeros (or ones) is flagged in `member`.
    Counting {
        count_zeros: bool,
        member: Vec<bool>,
    },
}

/// Hermitian idempotent on `qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialProjection {
    qubits: usize,
    repr: ProjectionRepr,
    rank: BigUint,
}

fn qubits_of(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return domain(format!("dimension {dim} is not a power of two"));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl SpecialProjection {
    /// Validates Hermiticity, idempotence and integral trace.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return domain("projection must be square");
        }
        let qubits = qubits_of(matrix.rows())?;
        let dev = matrix.hermitian_deviation();
        if dev > TOL_HERM {
            return domain(format!("projection not Hermitian (deviation {dev:.3e})"));
        }
        let matrix = matrix.mark_hermitian()?;
        let sq = matrix.mul(&matrix)?;
        let idem = sq.max_abs_diff(&matrix)?;
        if idem > TOL_IDEMPOTENT {
            return domain(format!("matrix is not idempotent (‖P²−P‖ = {idem:.3e})"));
        }
        let tr = matrix.trace().re;
        let rank = tr.round();
        if (tr - rank).abs() > TOL_IDEMPOTENT || rank < 0.0 {
            return domain(format!("trace {tr} is not an integer rank"));
        }
        Ok(SpecialProjection { qubits, repr: ProjectionRepr::Explicit(matrix), rank: BigUint::from(rank as u64) })
    }

    pub fn identity(qubits: usize) -> Self {
        SpecialProjection {
            qubits,
            repr: ProjectionRepr::Explicit(ComplexMatrix::identity(1 << qubits)),
            rank: BigUint::from(1usize << qubits),
        }
    }

    pub fn zero(qubits: usize) -> Self {
        SpecialProjection {
            qubits,
            repr: ProjectionRepr::Explicit(ComplexMatrix::zeros_sparse(1 << qubits, 1 << qubits)),
            rank: BigUint::zero(),
        }
    }

    /// Diagonal projector onto the listed basis indices.
    pub fn diagonal(qubits: usize, indices: &[usize]) -> Result<Self> {
        let d = 1usize << qubits;
        let mut w = vec![0.0; d];
        for &i in indices {
            if i >= d {
                return domain(format!("basis index {i} out of range"));
            }
            w[i] = 1.0;
        }
        let rank = w.iter().filter(|x| **x > 0.0).count();
        Ok(SpecialProjection {
            qubits,
            repr: ProjectionRepr::Explicit(ComplexMatrix::diagonal_real(&w)),
            rank: BigUint::from(rank),
        })
    }

    pub fn factored(blocks: Vec<SpecialProjection>) -> Self {
        let qubits = blocks.iter().map(|b| b.qubits).sum();
        let rank = blocks.iter().fold(BigUint::from(1u32), |acc, b| acc * &b.rank);
        SpecialProjection { qubits, repr: ProjectionRepr::Factored(blocks), rank }
    }

    /// Projector onto n-bit strings whose zero count (or one count) k has `member[k]`.
    pub fn counting(qubits: usize, count_zeros: bool, member: Vec<bool>) -> Result<Self> {
        if member.len() != qubits + 1 {
            return domain("counting projection needs one flag per count 0..=n");
        }
        let row = binom_row(qubits);
        let rank = member.iter().zip(&row).filter(|(m, _)| **m).map(|(_, c)| c.clone()).sum();
        Ok(SpecialProjection { qubits, repr: ProjectionRepr::Counting { count_zeros, member }, rank })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn repr(&self) -> &ProjectionRepr {
        &self.repr
    }

    pub fn rank(&self) -> &BigUint {
        &self.rank
    }

    /// rank · 2^{-n}.
    pub fn tau(&self) -> f64 {
        ratio_pow2(&self.rank, self.qubits)
    }

    /// ⟨σ|P|σ⟩ for the basis string with the given index.
    pub fn diagonal_entry(&self, index: usize) -> f64 {
        match &self.repr {
            ProjectionRepr::Explicit(m) => m.get(index, index).re,
            ProjectionRepr::Factored(blocks) => {
                let mut rest = self.qubits;
                let mut out = 1.0;
                for b in blocks {
                    rest -= b.qubits;
                    let local = (index >> rest) & ((1usize << b.qubits) - 1);
                    out *= b.diagonal_entry(local);
                }
                out
            }
            ProjectionRepr::Counting { count_zeros, member } => {
                let ones = index.count_ones() as usize;
                let k = if *count_zeros { self.qubits - ones } else { ones };
                if member[k] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.repr {
            ProjectionRepr::Explicit(m) => m.is_diagonal(),
            ProjectionRepr::Factored(b) => b.iter().all(|x| x.is_diagonal()),
            ProjectionRepr::Counting { .. } => true,
        }
    }

    /// Explicit matrix, materialized when the representation is implicit.
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        match &self.repr {
            ProjectionRepr::Explicit(m) => Ok(m.clone()),
            ProjectionRepr::Factored(blocks) => {
                if self.qubits >= usize::BITS as usize || (1usize << self.qubits) > limits().kron_max_dim {
                    return capacity(format!("cannot materialize a {}-qubit factored projection", self.qubits));
                }
                let mut out = ComplexMatrix::identity(1);
                for b in blocks {
                    out = kron(&out, &b.to_matrix()?)?;
                }
                Ok(out.assume_hermitian())
            }
            ProjectionRepr::Counting { .. } => {
                if self.qubits > limits().diagonal_max_qubits {
                    return capacity(format!("counting projection on {} qubits is kept implicit", self.qubits));
                }
                let d = 1usize << self.qubits;
                let w: Vec<f64> = (0..d).map(|i| self.diagonal_entry(i)).collect();
                Ok(ComplexMatrix::diagonal_real(&w))
            }
        }
    }

    /// P ⊗ I on `extra` more qubits.
    pub fn extend(&self, extra: usize) -> Result<SpecialProjection> {
        if extra == 0 {
            return Ok(self.clone());
        }
        let m = kron(&self.to_matrix()?, &ComplexMatrix::identity(1 << extra))?;
        Ok(SpecialProjection {
            qubits: self.qubits + extra,
            repr: ProjectionRepr::Explicit(m.assume_hermitian()),
            rank: &self.rank << extra,
        })
    }
}

/// Tr(ρ_n P) for the state's level `P.qubits()`, using whichever representation fits.
pub fn level_trace(state: &StatePrefix, p: &SpecialProjection) -> Result<f64> {
    let n = p.qubits;
    if n == 0 || n > state.depth() {
        return domain(format!("projection on {n} qubits outside state depth {}", state.depth()));
    }
    if let Some(t) = product_trace(state, p) {
        return Ok(t);
    }
    if let Ok(rho) = state.level(n) {
        if p.is_diagonal() {
            let w = rho.diagonal_weights();
            return Ok(w.iter().enumerate().map(|(i, x)| x * p.diagonal_entry(i)).sum());
        }
        return trace_inner(rho, &p.to_matrix()?);
    }
    if let (Some(_), ProjectionRepr::Factored(_)) = (state.factored(), &p.repr) {
        return factored_trace(state, p);
    }
    capacity(format!("level {n} of this state cannot be paired with this projection"))
}

/// ∏ Tr(d_i Π_i) over blocks aligned with the state's factored form.
pub fn factored_trace(state: &StatePrefix, p: &SpecialProjection) -> Result<f64> {
    let f = state.factored().ok_or_else(|| QrlError::Domain("state has no factored form".into()))?;
    let blocks = match &p.repr {
        ProjectionRepr::Factored(b) => b,
        _ => return domain("projection is not factored"),
    };
    if blocks.len() > f.blocks.len() {
        return domain("projection has more blocks than the state");
    }
    let mut out = 1.0;
    for (b, sb) in blocks.iter().zip(&f.blocks) {
        if b.qubits != sb.n {
            return domain(format!("block sizes differ: {} vs {}", b.qubits, sb.n));
        }
        out *= trace_inner(sb.full(), &b.to_matrix()?)?;
    }
    Ok(out)
}

/// Closed forms for counting projections against product diagonal states.
fn product_trace(state: &StatePrefix, p: &SpecialProjection) -> Option<f64> {
    let (count_zeros, member) = match &p.repr {
        ProjectionRepr::Counting { count_zeros, member } => (*count_zeros, member),
        _ => return None,
    };
    let n = p.qubits;
    let (a, b) = match &state.descriptor().generator {
        Generator::Tracial {} => (0.5, 0.5),
        Generator::Bernoulli { p } => (*p, 1.0 - p),
        Generator::Classical { x } => {
            let zeros = x.prefix(n).zeros();
            let k = if count_zeros { zeros } else { n - zeros };
            return Some(if member[k] { 1.0 } else { 0.0 });
        }
        _ => return None,
    };
    // a is the weight of a zero, b of a one
    let (za, ob) = if count_zeros { (a, b) } else { (b, a) };
    Some(weighted_binomial_sum(n, za, ob, |k| member[k]))
}

/// Checks range(p ⊗ I) ⊆ range(q) through ‖(p⊗I) q (p⊗I) − p⊗I‖_max.
pub fn nesting_deviation(p: &SpecialProjection, q: &SpecialProjection) -> Result<f64> {
    if p.qubits > q.qubits {
        return domain("nesting needs the lower level first");
    }
    let pe = p.extend(q.qubits - p.qubits)?.to_matrix()?;
    let qm = q.to_matrix()?;
    let sand = pe.mul(&qm)?.mul(&pe)?;
    sand.max_abs_diff(&pe)
}

pub(crate) fn check_nesting(p: &SpecialProjection, q: &SpecialProjection) -> Result<()> {
    let dev = nesting_deviation(p, q)?;
    if dev > TOL_IDEMPOTENT {
        return invariant(format!(
            "range of level {} is not contained in level {} (deviation {dev:.3e})",
            p.qubits, q.qubits
        ));
    }
    Ok(())
}
