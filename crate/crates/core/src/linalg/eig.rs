use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{inner, norm, ComplexMatrix, C64, ONE, TOL_HERM, ZERO};
use crate::error::{capacity, domain, Result};
use crate::limits::limits;

const TIE_TOL: f64 = 1e-12;
const ROUND_SCALE: f64 = 1e9;
const ORTHO_TOL: f64 = 1e-9;

/// Vector stored as sorted (index, value) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, C64)>,
}

impl SparseVec {
    pub fn basis(dim: usize, i: usize) -> Self {
        SparseVec { dim, entries: vec![(i, ONE)] }
    }

    pub fn from_dense(v: &[C64]) -> Self {
        SparseVec { dim: v.len(), entries: v.iter().copied().enumerate().filter(|(_, x)| *x != ZERO).collect() }
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn inner(&self, other: &SparseVec) -> C64 {
        let (mut i, mut j) = (0, 0);
        let mut s = ZERO;
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    s += self.entries[i].1.conj() * other.entries[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, x)| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨v|A|v⟩.
    pub fn quad_form(&self, a: &ComplexMatrix) -> C64 {
        let mut s = ZERO;
        for &(i, vi) in &self.entries {
            for &(j, vj) in &self.entries {
                s += vi.conj() * a.get(i, j) * vj;
            }
        }
        s
    }

    fn normalize_phase(&mut self) {
        if let Some(&(_, x)) = self.entries.iter().find(|(_, x)| x.norm() > 1e-9) {
            let ph = x.conj() / x.norm();
            for e in &mut self.entries {
                e.1 *= ph;
            }
        }
    }
}

fn rounded(x: C64) -> (i64, i64) {
    ((x.re * ROUND_SCALE).round() as i64, (x.im * ROUND_SCALE).round() as i64)
}

/// Lexicographic order on rounded entries, larger first-differing coordinate first.
fn vector_order(a: &SparseVec, b: &SparseVec) -> Ordering {
    let (mut i, mut j) = (0, 0);
    loop {
        let ai = a.entries.get(i).map(|e| e.0);
        let bj = b.entries.get(j).map(|e| e.0);
        let (idx, va, vb) = match (ai, bj) {
            (None, None) => return Ordering::Equal,
            (Some(x), None) => (x, a.entries[i].1, ZERO),
            (None, Some(y)) => (y, ZERO, b.entries[j].1),
            (Some(x), Some(y)) => match x.cmp(&y) {
                Ordering::Less => (x, a.entries[i].1, ZERO),
                Ordering::Greater => (y, ZERO, b.entries[j].1),
                Ordering::Equal => (x, a.entries[i].1, b.entries[j].1),
            },
        };
        if ai == Some(idx) {
            i += 1;
        }
        if bj == Some(idx) {
            j += 1;
        }
        let (ra, rb) = (rounded(va), rounded(vb));
        if ra != rb {
            return rb.cmp(&ra);
        }
    }
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<SparseVec>,
}

impl SpectralDecomposition {
    /// Σ α_i |v_i⟩⟨v_i| in sparse storage.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut trip = Vec::new();
        for (a, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for &(i, x) in &v.entries {
                for &(j, y) in &v.entries {
                    trip.push((i, j, x * y.conj() * *a));
                }
            }
        }
        ComplexMatrix::from_triplets(self.dim, self.dim, trip).expect("indices in range")
    }

    /// max |⟨v_i|v_j⟩ − δ_ij| over eigenvector pairs sharing support.
    pub fn orthonormality_error(&self) -> f64 {
        sparse_orthonormality(&self.eigenvectors).0
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let n = self.0[y];
            self.0[y] = r;
            y = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the sparsity graph, each sorted, ordered by first index.
fn components(a: &ComplexMatrix) -> Vec<Vec<usize>> {
    let n = a.rows();
    let mut dsu = Dsu((0..n).collect());
    for (i, j, _) in a.entries() {
        if i != j {
            dsu.union(i, j);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = dsu.find(i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return domain(format!("eigendecomposition needs a square matrix, got {}x{}", a.rows(), a.cols()));
    }
    if !a.hermitian_flag() {
        let dev = a.hermitian_deviation();
        if dev > TOL_HERM {
            return domain(format!("matrix is not Hermitian (deviation {dev:.3e})"));
        }
    }
    Ok(())
}

fn block(a: &ComplexMatrix, idx: &[usize], pos: &mut [usize]) -> DMatrix<C64> {
    let k = idx.len();
    for (l, &i) in idx.iter().enumerate() {
        pos[i] = l;
    }
    let mut m = DMatrix::from_element(k, k, ZERO);
    for (l, &i) in idx.iter().enumerate() {
        for (j, v) in a.row(i) {
            m[(l, pos[j])] = v;
        }
    }
    // symmetrize to remove rounding-level asymmetry
    let mt = m.adjoint();
    (m + mt) * C64::new(0.5, 0.0)
}

/// Hermitian eigendecomposition, block by block over the sparsity graph.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<SpectralDecomposition> {
    check_hermitian(a)?;
    let n = a.rows();
    let comps = components(a);
    let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
    if largest > limits().dense_max_dim {
        return capacity(format!("eigen block of size {largest} exceeds dense cap {}", limits().dense_max_dim));
    }
    let mut pairs: Vec<(f64, SparseVec)> = Vec::with_capacity(n);
    let mut pos = vec![0usize; n];
    for idx in comps {
        if idx.len() == 1 {
            let i = idx[0];
            pairs.push((a.get(i, i).re, SparseVec::basis(n, i)));
            continue;
        }
        let eig = SymmetricEigen::new(block(a, &idx, &mut pos));
        for c in 0..idx.len() {
            let col = eig.eigenvectors.column(c);
            let entries = idx.iter().zip(col.iter()).filter(|(_, x)| **x != ZERO).map(|(&i, &x)| (i, x)).collect();
            let mut v = SparseVec { dim: n, entries };
            v.normalize_phase();
            pairs.push((eig.eigenvalues[c], v));
        }
    }
    if pairs.iter().any(|(x, _)| !x.is_finite()) {
        return domain("non-finite eigenvalue");
    }
    sort_pairs(&mut pairs);
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(SpectralDecomposition { dim: n, eigenvalues, eigenvectors })
}

fn sort_pairs(pairs: &mut [(f64, SparseVec)]) {
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end - 1].0 - pairs[end].0 <= TIE_TOL {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|x, y| vector_order(&x.1, &y.1));
        }
        start = end;
    }
}

/// Eigenvalues only, sorted descending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut vals = Vec::with_capacity(n);
    if a.is_diagonal() {
        vals.extend(a.diagonal().iter().map(|x| x.re));
    } else {
        let comps = components(a);
        let largest = comps.iter().map(Vec::len).max().unwrap_or(0);
        if largest > limits().dense_max_dim {
            return capacity(format!("eigen block of size {largest} exceeds dense cap {}", limits().dense_max_dim));
        }
        let mut pos = vec![0usize; n];
        for idx in comps {
            if idx.len() == 1 {
                vals.push(a.get(idx[0], idx[0]).re);
            } else {
                vals.extend(block(a, &idx, &mut pos).symmetric_eigenvalues().iter());
            }
        }
    }
    vals.sort_by(|x, y| y.total_cmp(x));
    Ok(vals)
}

/// Result of [`top_eigvec_in_complement`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementEig {
    pub value: f64,
    pub vector: Vec<C64>,
    /// Set when the basis spans the whole space; `value` is then 0 and `vector` empty.
    pub exhausted: bool,
}

/// Orthonormal basis of the orthocomplement of span(basis), by Gram-Schmidt on e_0, e_1, ….
pub fn complement_basis(dim: usize, basis: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let target = dim.saturating_sub(basis.len());
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(target);
    for i in 0..dim {
        if out.len() == target {
            break;
        }
        let mut v = vec![ZERO; dim];
        v[i] = ONE;
        for _ in 0..2 {
            for b in basis.iter().chain(out.iter()) {
                let c = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-3 {
            v.iter_mut().for_each(|x| *x /= nv);
            out.push(v);
        }
    }
    out
}

/// Largest eigenpair of P⊥·A·P⊥ restricted to the orthocomplement of span(basis).
pub fn top_eigvec_in_complement(a: &ComplexMatrix, basis: &[Vec<C64>]) -> Result<ComplementEig> {
    check_hermitian(a)?;
    let dim = a.rows();
    if dim > limits().dense_max_dim {
        return capacity(format!("dimension {dim} exceeds dense cap"));
    }
    if basis.iter().any(|b| b.len() != dim) {
        return domain("basis vector dimension mismatch");
    }
    check_orthonormal(basis)?;
    let q = complement_basis(dim, basis);
    if q.is_empty() {
        return Ok(ComplementEig { value: 0.0, vector: Vec::new(), exhausted: true });
    }
    let aq: Vec<Vec<C64>> = q.iter().map(|v| a.matvec(v)).collect::<Result<_>>()?;
    let k = q.len();
    let mut m = DMatrix::from_element(k, k, ZERO);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = inner(&q[i], &aq[j]);
        }
    }
    let mt = m.adjoint();
    let eig = SymmetricEigen::new((m + mt) * C64::new(0.5, 0.0));
    let mut best = 0;
    for c in 1..k {
        if eig.eigenvalues[c] > eig.eigenvalues[best] {
            best = c;
        }
    }
    let u = eig.eigenvectors.column(best);
    let mut v = vec![ZERO; dim];
    for (qi, &ui) in q.iter().zip(u.iter()) {
        for (x, y) in v.iter_mut().zip(qi) {
            *x += ui * y;
        }
    }
    for b in basis {
        let c = inner(b, &v);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sv = SparseVec { dim, entries: v.iter().copied().enumerate().collect() };
    sv.normalize_phase();
    Ok(ComplementEig { value: eig.eigenvalues[best], vector: sv.to_dense(), exhausted: false })
}

fn check_orthonormal(vectors: &[Vec<C64>]) -> Result<()> {
    for (i, v) in vectors.iter().enumerate() {
        for (j, w) in vectors.iter().enumerate().skip(i) {
            let want = if i == j { ONE } else { ZERO };
            let dev = (inner(v, w) - want).norm();
            if dev > ORTHO_TOL {
                return domain(format!("vectors {i} and {j} are not orthonormal (deviation {dev:.3e})"));
            }
        }
    }
    Ok(())
}

/// Max orthonormality error and the worst pair, over pairs sharing support.
fn sparse_orthonormality(vectors: &[SparseVec]) -> (f64, Option<(usize, usize)>) {
    let dim = vectors.first().map(|v| v.dim).unwrap_or(0);
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for (k, v) in vectors.iter().enumerate() {
        for &(i, _) in &v.entries {
            touching[i].push(k);
        }
    }
    let mut worst = (0.0f64, None);
    for (k, v) in vectors.iter().enumerate() {
        let dev = (v.norm() - 1.0).abs();
        if dev > worst.0 {
            worst = (dev, Some((k, k)));
        }
        let partners: BTreeSet<usize> =
            v.entries.iter().flat_map(|(i, _)| touching[*i].iter().copied()).filter(|&l| l > k).collect();
        for l in partners {
            let dev = v.inner(&vectors[l]).norm();
            if dev > worst.0 {
                worst = (dev, Some((k, l)));
            }
        }
    }
    worst
}

/// Σ |v⟩⟨v| for an orthonormal list of dense vectors.
pub fn projector_from(dim: usize, vectors: &[Vec<C64>]) -> Result<ComplexMatrix> {
    if vectors.iter().any(|v| v.len() != dim) {
        return domain("vector dimension mismatch");
    }
    check_orthonormal(vectors)?;
    if dim <= limits().dense_max_dim {
        let mut d = vec![ZERO; dim * dim];
        for v in vectors {
            for i in 0..dim {
                if v[i] == ZERO {
                    continue;
                }
                for j in 0..dim {
                    d[i * dim + j] += v[i] * v[j].conj();
                }
            }
        }
        return Ok(ComplexMatrix::dense(dim, dim, d)?.assume_hermitian());
    }
    let sv: Vec<SparseVec> = vectors.iter().map(|v| SparseVec::from_dense(v)).collect();
    projector_from_sparse(dim, &sv)
}

/// Σ |v⟩⟨v| for an orthonormal list of sparse vectors, in sparse storage.
pub fn projector_from_sparse(dim: usize, vectors: &[SparseVec]) -> Result<ComplexMatrix> {
    if vectors.iter().any(|v| v.dim != dim) {
        return domain("vector dimension mismatch");
    }
    let (dev, pair) = sparse_orthonormality(vectors);
    if dev > ORTHO_TOL {
        let (i, j) = pair.unwrap_or((0, 0));
        return domain(format!("vectors {i} and {j} are not orthonormal (deviation {dev:.3e})"));
    }
    let mut trip = Vec::new();
    for v in vectors {
        for &(i, x) in &v.entries {
            for &(j, y) in &v.entries {
                trip.push((i, j, x * y.conj()));
            }
        }
    }
    Ok(ComplexMatrix::from_triplets(dim, dim, trip)?.assume_hermitian())
}
