use num_complex::Complex64;

use crate::error::{capacity, domain, Result};
use crate::limits::limits;

pub type C64 = Complex64;

pub const TOL_HERM: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Backing store of a [`ComplexMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    /// Row-major entries.
    Dense(Vec<C64>),
    /// Compressed sparse rows; columns within a row are strictly increasing.
    Sparse { row_ptr: Vec<usize>, cols: Vec<u32>, vals: Vec<C64> },
}

/// Complex matrix with dense or sparse-by-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    storage: Storage,
    hermitian: bool,
}

impl ComplexMatrix {
    pub fn dense(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return domain(format!("dense matrix {rows}x{cols} needs {} entries, got {}", rows * cols, data.len()));
        }
        Ok(ComplexMatrix { rows, cols, storage: Storage::Dense(data), hermitian: false })
    }

    pub fn zeros_dense(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, storage: Storage::Dense(vec![ZERO; rows * cols]), hermitian: false }
    }

    pub fn zeros_sparse(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            storage: Storage::Sparse { row_ptr: vec![0; rows + 1], cols: Vec::new(), vals: Vec::new() },
            hermitian: rows == cols,
        }
    }

    /// Builds a sparse matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, C64)>) -> Result<Self> {
        if cols > u32::MAX as usize {
            return capacity(format!("column count {cols} exceeds sparse index range"));
        }
        if let Some(&(r, c, _)) = trip.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return domain(format!("sparse index ({r},{c}) out of range for {rows}x{cols}"));
        }
        trip.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut cs: Vec<u32> = Vec::with_capacity(trip.len());
        let mut vs: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vs.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                cs.push(c as u32);
                vs.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(ComplexMatrix { rows, cols, storage: Storage::Sparse { row_ptr, cols: cs, vals: vs }, hermitian: false })
    }

    /// Builds a sparse matrix from per-row entry lists sorted by column.
    pub(crate) fn from_sorted_rows(rows: usize, cols: usize, data: Vec<Vec<(u32, C64)>>) -> Self {
        debug_assert_eq!(rows, data.len());
        let nnz = data.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut cs = Vec::with_capacity(nnz);
        let mut vs = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in data {
            for (c, v) in row {
                cs.push(c);
                vs.push(v);
            }
            row_ptr.push(cs.len());
        }
        ComplexMatrix { rows, cols, storage: Storage::Sparse { row_ptr, cols: cs, vals: vs }, hermitian: false }
    }

    pub(crate) fn from_csr(rows: usize, cols: usize, row_ptr: Vec<usize>, cs: Vec<u32>, vs: Vec<C64>) -> Self {
        ComplexMatrix { rows, cols, storage: Storage::Sparse { row_ptr, cols: cs, vals: vs }, hermitian: false }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::diagonal_real(&vec![1.0; n]);
        m.hermitian = true;
        m
    }

    /// Sparse diagonal matrix with real entries.
    pub fn diagonal_real(d: &[f64]) -> Self {
        let n = d.len();
        let row_ptr = (0..=n).collect();
        let cs = (0..n as u32).collect();
        let vs = d.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut m = Self::from_csr(n, n, row_ptr, cs, vs);
        m.hermitian = true;
        m
    }

    pub fn column(v: &[C64]) -> Self {
        ComplexMatrix { rows: v.len(), cols: 1, storage: Storage::Dense(v.to_vec()), hermitian: false }
    }

    /// Outer product |v⟩⟨v|.
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        let mut d = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = v[i] * v[j].conj();
            }
        }
        ComplexMatrix { rows: n, cols: n, storage: Storage::Dense(d), hermitian: true }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    /// Sets the Hermitian flag after checking it holds within `TOL_HERM`.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let dev = self.hermitian_deviation();
        if dev > TOL_HERM {
            return domain(format!("matrix is not Hermitian (deviation {dev:.3e})"));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub(crate) fn assume_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.len(),
            Storage::Sparse { vals, .. } => vals.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Dense(d) => d[i * self.cols + j],
            Storage::Sparse { row_ptr, cols, vals } => {
                let (a, b) = (row_ptr[i], row_ptr[i + 1]);
                match cols[a..b].binary_search(&(j as u32)) {
                    Ok(k) => vals[a + k],
                    Err(_) => ZERO,
                }
            }
        }
    }

    /// Stored entries of row `i` as (column, value).
    pub fn row(&self, i: usize) -> Box<dyn Iterator<Item = (usize, C64)> + '_> {
        match &self.storage {
            Storage::Dense(d) => {
                let c = self.cols;
                Box::new(d[i * c..(i + 1) * c].iter().copied().enumerate())
            }
            Storage::Sparse { row_ptr, cols, vals } => {
                let (a, b) = (row_ptr[i], row_ptr[i + 1]);
                Box::new(cols[a..b].iter().map(|&c| c as usize).zip(vals[a..b].iter().copied()))
            }
        }
    }

    /// All stored entries in row-major order, skipping exact zeros.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).filter(|(_, v)| *v != ZERO).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        if self.is_dense() {
            return Ok(self.clone());
        }
        let max = limits().dense_max_dim;
        if self.rows > max || self.cols > max {
            return capacity(format!("dense materialization of {}x{} exceeds cap {max}", self.rows, self.cols));
        }
        Ok(self.to_dense_unchecked())
    }

    pub(crate) fn to_dense_unchecked(&self) -> ComplexMatrix {
        let mut d = vec![ZERO; self.rows * self.cols];
        for (i, j, v) in self.entries() {
            d[i * self.cols + j] = v;
        }
        ComplexMatrix { rows: self.rows, cols: self.cols, storage: Storage::Dense(d), hermitian: self.hermitian }
    }

    pub fn to_sparse(&self) -> ComplexMatrix {
        if !self.is_dense() {
            return self.clone();
        }
        let data = (0..self.rows)
            .map(|i| self.row(i).filter(|(_, v)| *v != ZERO).map(|(j, v)| (j as u32, v)).collect())
            .collect();
        let mut m = Self::from_sorted_rows(self.rows, self.cols, data);
        m.hermitian = self.hermitian;
        m
    }

    /// Row-major dense entries.
    pub fn dense_data(&self) -> Vec<C64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            _ => match self.to_dense_unchecked().storage {
                Storage::Dense(d) => d,
                _ => unreachable!(),
            },
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries().all(|(i, j, _)| i == j)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// max |A[i][j] − conj(A[j][i])|.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for (i, j, v) in self.entries() {
            dev = dev.max((v - self.get(j, i).conj()).norm());
        }
        dev
    }

    /// Entrywise max-norm of `self − other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return domain(format!("shape mismatch {}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let mut dev = 0.0f64;
        for (i, j, v) in self.entries() {
            dev = dev.max((v - other.get(i, j)).norm());
        }
        for (i, j, v) in other.entries() {
            dev = dev.max((v - self.get(i, j)).norm());
        }
        Ok(dev)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let trip = self.entries().map(|(i, j, v)| (j, i, v.conj())).collect();
        let m = Self::from_triplets(self.cols, self.rows, trip).expect("indices in range");
        let mut m = if self.is_dense() { m.to_dense_unchecked() } else { m };
        m.hermitian = self.hermitian;
        m
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        let mut out = self.clone();
        match &mut out.storage {
            Storage::Dense(d) => d.iter_mut().for_each(|x| *x *= s),
            Storage::Sparse { vals, .. } => vals.iter_mut().for_each(|x| *x *= s),
        }
        out.hermitian = self.hermitian && s.im == 0.0;
        out
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &ComplexMatrix, s: C64) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return domain("shape mismatch in addition");
        }
        let herm = self.hermitian && other.hermitian && s.im == 0.0;
        if self.is_dense() || other.is_dense() {
            let mut d = self.dense_data();
            for (i, j, v) in other.entries() {
                d[i * self.cols + j] += s * v;
            }
            let mut m = Self::dense(self.rows, self.cols, d)?;
            m.hermitian = herm;
            return Ok(m);
        }
        let mut trip: Vec<(usize, usize, C64)> = self.entries().collect();
        trip.extend(other.entries().map(|(i, j, v)| (i, j, s * v)));
        let mut m = Self::from_triplets(self.rows, self.cols, trip)?;
        m.hermitian = herm;
        Ok(m)
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.add_scaled(other, ONE)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.add_scaled(other, -ONE)
    }

    /// Matrix product. Dense if either operand is dense, sparse otherwise.
    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return domain(format!("cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        if self.is_dense() || other.is_dense() {
            // four real products: (A + iB)(C + iD) = (AC - BD) + i(AD + BC)
            let split = |data: Vec<C64>, r: usize, c: usize| {
                (
                    nalgebra::DMatrix::from_row_iterator(r, c, data.iter().map(|z| z.re)),
                    nalgebra::DMatrix::from_row_iterator(r, c, data.iter().map(|z| z.im)),
                )
            };
            let (ar, ai) = split(self.dense_data(), n, k);
            let (br, bi) = split(other.dense_data(), k, m);
            let re = &ar * &br - &ai * &bi;
            let im = &ar * &bi + &ai * &br;
            let mut d = Vec::with_capacity(n * m);
            for i in 0..n {
                for j in 0..m {
                    d.push(C64::new(re[(i, j)], im[(i, j)]));
                }
            }
            return Self::dense(n, m, d);
        }
        let mut acc = vec![ZERO; m];
        let mut mark = vec![usize::MAX; m];
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let mut touched: Vec<u32> = Vec::new();
            for (l, a) in self.row(i) {
                for (j, b) in other.row(l) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = ZERO;
                        touched.push(j as u32);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            data.push(touched.into_iter().map(|j| (j, acc[j as usize])).collect());
        }
        Ok(Self::from_sorted_rows(n, m, data))
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return domain(format!("vector length {} does not match {} columns", v.len(), self.cols));
        }
        Ok((0..self.rows).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect())
    }

    /// ⟨v|A|v⟩.
    pub fn quad_form(&self, v: &[C64]) -> Result<C64> {
        if v.len() != self.cols || !self.is_square() {
            return domain("quadratic form dimension mismatch");
        }
        let mut s = ZERO;
        for i in 0..self.rows {
            if v[i] == ZERO {
                continue;
            }
            let r: C64 = self.row(i).map(|(j, a)| a * v[j]).sum();
            s += v[i].conj() * r;
        }
        Ok(s)
    }

    /// Tr(A·B) without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> Result<C64> {
        if self.cols != other.rows || self.rows != other.cols {
            return domain("trace product dimension mismatch");
        }
        Ok(self.entries().map(|(i, j, v)| v * other.get(j, i)).sum())
    }
}

/// Kronecker product with `(a⊗b)[i·rows_b+r][j·cols_b+c] = a[i][j]·b[r][c]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let max = limits().kron_max_dim;
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r <= max && c <= max => (r, c),
        _ => return capacity(format!("Kronecker product exceeds max dimension {max}")),
    };
    let herm = a.hermitian && b.hermitian;
    let dense_max = limits().dense_max_dim;
    if a.is_dense() && b.is_dense() && rows <= dense_max && cols <= dense_max {
        let mut d = vec![ZERO; rows * cols];
        for i in 0..a.rows {
            for j in 0..a.cols {
                let av = a.get(i, j);
                if av == ZERO {
                    continue;
                }
                for r in 0..b.rows {
                    for c in 0..b.cols {
                        d[(i * b.rows + r) * cols + j * b.cols + c] = av * b.get(r, c);
                    }
                }
            }
        }
        let mut m = ComplexMatrix::dense(rows, cols, d)?;
        m.hermitian = herm;
        return Ok(m);
    }
    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut cs = Vec::new();
    let mut vs = Vec::new();
    row_ptr.push(0);
    for i in 0..a.rows {
        let arow: Vec<(usize, C64)> = a.row(i).filter(|(_, v)| *v != ZERO).collect();
        for r in 0..b.rows {
            let brow: Vec<(usize, C64)> = b.row(r).filter(|(_, v)| *v != ZERO).collect();
            for &(j, av) in &arow {
                for &(c, bv) in &brow {
                    cs.push((j * b.cols + c) as u32);
                    vs.push(av * bv);
                }
            }
            row_ptr.push(cs.len());
        }
    }
    let mut m = ComplexMatrix::from_csr(rows, cols, row_ptr, cs, vs);
    m.hermitian = herm;
    Ok(m)
}

/// Kronecker product of two vectors in the same convention as [`kron`].
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Tensor product of single-qubit vectors, first factor most significant.
pub fn product_vector(factors: &[[C64; 2]]) -> Vec<C64> {
    let mut v = vec![ONE];
    for f in factors {
        v = kron_vec(&v, f);
    }
    v
}

/// Traces out the last tensor factor of dimension 2: σ[i][j] = Σ_b A[2i+b][2j+b].
pub fn partial_trace_last_matrix(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() || a.rows < 2 || !a.rows.is_multiple_of(2) {
        return domain(format!("partial trace needs an even square matrix, got {}x{}", a.rows, a.cols));
    }
    let n = a.rows / 2;
    let herm = a.hermitian;
    match &a.storage {
        Storage::Dense(d) => {
            let c = a.cols;
            let mut out = vec![ZERO; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = d[(2 * i) * c + 2 * j] + d[(2 * i + 1) * c + 2 * j + 1];
                }
            }
            let mut m = ComplexMatrix::dense(n, n, out)?;
            m.hermitian = herm;
            Ok(m)
        }
        Storage::Sparse { .. } => {
            let mut data = Vec::with_capacity(n);
            for i in 0..n {
                let even = a.row(2 * i).filter(|(c, _)| c % 2 == 0).map(|(c, v)| ((c / 2) as u32, v));
                let odd = a.row(2 * i + 1).filter(|(c, _)| c % 2 == 1).map(|(c, v)| ((c / 2) as u32, v));
                data.push(merge_sum(even.collect(), odd.collect()));
            }
            let mut m = ComplexMatrix::from_sorted_rows(n, n, data);
            m.hermitian = herm;
            Ok(m)
        }
    }
}

fn merge_sum(a: Vec<(u32, C64)>, b: Vec<(u32, C64)>) -> Vec<(u32, C64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let item = if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            a[i - 1]
        } else if i >= a.len() || b[j].0 < a[i].0 {
            j += 1;
            b[j - 1]
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, a[i - 1].1 + b[j - 1].1)
        };
        if item.1 != ZERO {
            out.push(item);
        }
    }
    out
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
