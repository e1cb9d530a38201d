//! Measurement systems, the induced premeasure on Cantor space and sequential sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{capacity, domain, invariant, QrlError, Result};
use crate::linalg::{product_vector, ComplexMatrix, DensityMatrix, C64, ZERO};
use crate::qtests::{ClassicalMlt, MassMeasure, Members, QSigmaSet, QTest, SpecialProjection, TestKind};
use crate::rng::rng_for;
use crate::states::StatePrefix;

pub const TOL_BASIS: f64 = 1e-10;
pub const TOL_ADDITIVE: f64 = 1e-10;
/// Prefix masses at or below this are treated as zero when conditioning.
pub const ZERO_FLOOR: f64 = 1e-14;
pub const MAX_TABLE_DEPTH: usize = 20;

/// An orthonormal basis (b_0, b_1) of ℂ².
pub type Basis = [[C64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisGenerator {
    Standard,
    Hadamard,
    /// Qubit q uses vectors[(q−1) mod len] and its orthogonal complement.
    Periodic {
        vectors: Vec<[C64; 2]>,
    },
    /// One basis per qubit, from qubit 1.
    Explicit {
        bases: Vec<Basis>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSystem {
    generator: BasisGenerator,
}

fn orthonormality_error(b: &Basis) -> f64 {
    let ip = |x: &[C64; 2], y: &[C64; 2]| x[0].conj() * y[0] + x[1].conj() * y[1];
    let e00 = (ip(&b[0], &b[0]) - 1.0).norm();
    let e11 = (ip(&b[1], &b[1]) - 1.0).norm();
    let e01 = ip(&b[0], &b[1]).norm();
    e00.max(e11).max(e01)
}

/// (v, w) with w = (−v̄₁, v̄₀).
fn complete(v: [C64; 2]) -> Basis {
    [v, [-v[1].conj(), v[0].conj()]]
}

impl MeasurementSystem {
    pub fn new(generator: BasisGenerator) -> Result<Self> {
        let s = MeasurementSystem { generator };
        match &s.generator {
            BasisGenerator::Periodic { vectors } if vectors.is_empty() => {
                return domain("periodic basis needs at least one vector")
            }
            BasisGenerator::Explicit { bases } if bases.is_empty() => return domain("explicit system has no bases"),
            _ => {}
        }
        let checks: Vec<Basis> = match &s.generator {
            BasisGenerator::Periodic { vectors } => vectors.iter().map(|v| complete(*v)).collect(),
            BasisGenerator::Explicit { bases } => bases.clone(),
            _ => vec![],
        };
        for (i, b) in checks.iter().enumerate() {
            let e = orthonormality_error(b);
            if !(e <= TOL_BASIS) {
                return domain(format!("basis {} is not orthonormal (error {e:.3e})", i + 1));
            }
        }
        Ok(s)
    }

    pub fn standard() -> Self {
        MeasurementSystem { generator: BasisGenerator::Standard }
    }

    pub fn hadamard() -> Self {
        MeasurementSystem { generator: BasisGenerator::Hadamard }
    }

    pub fn generator(&self) -> &BasisGenerator {
        &self.generator
    }

    /// Basis for qubit `q` (1-based).
    pub fn basis(&self, q: usize) -> Result<Basis> {
        let o = C64::new(1.0, 0.0);
        Ok(match &self.generator {
            BasisGenerator::Standard => [[o, ZERO], [ZERO, o]],
            BasisGenerator::Hadamard => {
                let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            BasisGenerator::Periodic { vectors } => complete(vectors[(q - 1) % vectors.len()]),
            BasisGenerator::Explicit { bases } => {
                *bases.get(q - 1).ok_or_else(|| QrlError::Domain(format!("no basis given for qubit {q}")))?
            }
        })
    }

    fn is_standard(&self) -> bool {
        matches!(self.generator, BasisGenerator::Standard)
    }

    /// b^{offset+1}_{τ(1)} ⊗ … for the bits of τ.
    fn vectors(&self, offset: usize, tau: &[bool]) -> Result<Vec<[C64; 2]>> {
        tau.iter().enumerate().map(|(i, &t)| self.basis(offset + i + 1).map(|b| b[t as usize])).collect()
    }
}

/// ⟨b|f|b⟩ for a single-qubit operator.
fn qubit_mass(f: &[[C64; 2]; 2], b: &[C64; 2]) -> f64 {
    let mut s = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            s += b[r].conj() * f[r][c] * b[c];
        }
    }
    s.re
}

fn real_part(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > TOL_ADDITIVE {
        return invariant(format!("{what} has imaginary part {:.3e}", z.im));
    }
    Ok(z.re)
}

/// p(τ) = ⟨v|ρ_n|v⟩ for v = ⊗_i b^i_{τ(i)}, n = |τ|.
pub fn premeasure(state: &StatePrefix, b: &MeasurementSystem, tau: &BitString) -> Result<f64> {
    let n = tau.len();
    if n > state.depth() {
        return domain(format!("|τ| = {n} exceeds prefix depth {}", state.depth()));
    }
    if n == 0 {
        return Ok(1.0);
    }
    if state.product_factor(1).is_some() {
        let mut p = 1.0;
        for q in 1..=n {
            p *= qubit_mass(&state.product_factor(q).unwrap(), &b.basis(q)?[tau.bit(q - 1) as usize]);
        }
        return Ok(p);
    }
    if let Ok(rho) = state.level(n) {
        let v = product_vector(&b.vectors(0, &tau.0)?);
        return real_part(rho.matrix().quad_form(&v)?, "premeasure");
    }
    if let Some(f) = state.factored() {
        let (last, kept) = f.locate(n).unwrap();
        let mut p = 1.0;
        for (i, blk) in f.blocks[..=last].iter().enumerate() {
            let off = f.offset(i);
            let k = if i == last { kept } else { blk.n };
            let v = product_vector(&b.vectors(off, &tau.0[off..off + k])?);
            p *= real_part(blk.chain[blk.n - k].matrix().quad_form(&v)?, "premeasure")?;
        }
        return Ok(p);
    }
    capacity(format!("level {n} is not available for this state"))
}

/// diag(U ρ U†) for U = ⊗ b†, keyed by basis string, by contracting one qubit at a time.
fn contract_table(m: &ComplexMatrix, bases: &[Basis]) -> Vec<f64> {
    let q = bases.len();
    let dim = 1usize << q;
    if m.is_diagonal() {
        let mut v: Vec<f64> = (0..dim).map(|i| m.get(i, i).re).collect();
        for (i, b) in bases.iter().enumerate() {
            let bit = q - 1 - i;
            let k = [[b[0][0].norm_sqr(), b[0][1].norm_sqr()], [b[1][0].norm_sqr(), b[1][1].norm_sqr()]];
            for base in 0..dim {
                if base >> bit & 1 == 1 {
                    continue;
                }
                let (x0, x1) = (v[base], v[base | 1 << bit]);
                v[base] = k[0][0] * x0 + k[0][1] * x1;
                v[base | 1 << bit] = k[1][0] * x0 + k[1][1] * x1;
            }
        }
        return v;
    }
    let mut entries: Vec<((usize, usize), C64)> = m.entries().map(|(i, j, a)| ((i, j), a)).collect();
    for (i, b) in bases.iter().enumerate() {
        let bit = q - 1 - i;
        let mut next = Vec::with_capacity(entries.len() * 2);
        for &((r, c), a) in &entries {
            let (rb, cb) = (r >> bit & 1, c >> bit & 1);
            for t in 0..2usize {
                let w = b[t][rb].conj() * a * b[t][cb];
                if w != ZERO {
                    let mask = !(1usize << bit);
                    next.push((((r & mask) | t << bit, (c & mask) | t << bit), w));
                }
            }
        }
        next.sort_by_key(|e| e.0);
        entries.clear();
        for (k, w) in next {
            match entries.last_mut() {
                Some(last) if last.0 == k => last.1 += w,
                _ => entries.push((k, w)),
            }
        }
    }
    let mut out = vec![0.0; dim];
    for ((r, c), w) in entries {
        if r == c {
            out[r] = w.re;
        }
    }
    out
}

fn kron_table(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// All 2^n values p(τ), |τ| = n, indexed by τ read as a binary number.
pub fn level_table(state: &StatePrefix, b: &MeasurementSystem, n: usize) -> Result<Vec<f64>> {
    if n > state.depth() {
        return domain(format!("depth {n} exceeds prefix depth {}", state.depth()));
    }
    if n > MAX_TABLE_DEPTH {
        return capacity(format!("premeasure table depth {n} exceeds {MAX_TABLE_DEPTH}"));
    }
    if n == 0 {
        return Ok(vec![1.0]);
    }
    if state.product_factor(1).is_some() {
        let mut t = vec![1.0];
        for q in 1..=n {
            let f = state.product_factor(q).unwrap();
            let bq = b.basis(q)?;
            t = kron_table(&t, &[qubit_mass(&f, &bq[0]), qubit_mass(&f, &bq[1])]);
        }
        return Ok(t);
    }
    let bases = |off: usize, k: usize| (off + 1..=off + k).map(|q| b.basis(q)).collect::<Result<Vec<_>>>();
    if let Ok(rho) = state.level(n) {
        if b.is_standard() {
            return Ok(rho.diagonal_weights());
        }
        return Ok(contract_table(rho.matrix(), &bases(0, n)?));
    }
    if let Some(f) = state.factored() {
        let (last, kept) = f.locate(n).unwrap();
        let mut t = vec![1.0];
        for (i, blk) in f.blocks[..=last].iter().enumerate() {
            let k = if i == last { kept } else { blk.n };
            t = kron_table(&t, &contract_table(blk.chain[blk.n - k].matrix(), &bases(f.offset(i), k)?));
        }
        return Ok(t);
    }
    capacity(format!("level {n} is not available for this state"))
}

/// p(τ) for every τ of length ≤ depth.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPremeasure {
    /// `levels[k][i]` is p of the length-k string with index i.
    levels: Vec<Vec<f64>>,
    pub max_additivity_deviation: f64,
}

impl CylinderPremeasure {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// p(τ), clamped to [0,1].
    pub fn get(&self, tau: &BitString) -> Option<f64> {
        self.levels.get(tau.len()).map(|l| l[tau.index()].clamp(0.0, 1.0))
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// (τ, p(τ)) rows in length-then-lexicographic order.
    pub fn rows(&self) -> impl Iterator<Item = (BitString, f64)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.iter().enumerate().map(move |(i, p)| (BitString::from_index(k, i), p.clamp(0.0, 1.0))))
    }
}

/// Full premeasure table up to `depth`, with p(τ) = p(τ0) + p(τ1) checked.
pub fn build_premeasure(state: &StatePrefix, b: &MeasurementSystem, depth: usize) -> Result<CylinderPremeasure> {
    let levels = (0..=depth).map(|k| level_table(state, b, k)).collect::<Result<Vec<_>>>()?;
    let mut dev = 0.0f64;
    for k in 1..=depth {
        for (i, p) in levels[k - 1].iter().enumerate() {
            dev = dev.max((p - levels[k][2 * i] - levels[k][2 * i + 1]).abs());
        }
    }
    for l in &levels {
        if let Some(bad) = l.iter().find(|p| !(**p >= -1e-12 && **p <= 1.0 + 1e-12)) {
            return invariant(format!("premeasure value {bad} outside [0,1]"));
        }
    }
    if dev > TOL_ADDITIVE {
        return invariant(format!("premeasure additivity fails by {dev:.3e}"));
    }
    Ok(CylinderPremeasure { levels, max_additivity_deviation: dev })
}

fn zero_mass(tau: &BitString, p: f64) -> QrlError {
    QrlError::Sampling(format!("prefix `{tau}` has mass {p:.3e}; cannot condition"))
}

/// Draws bit i with probability p(τ1)/p(τ) given the prefix τ; one uniform variate per bit.
pub fn sample(state: &StatePrefix, b: &MeasurementSystem, n: usize, seed: u64) -> Result<BitString> {
    if n > state.depth() {
        return domain(format!("n = {n} exceeds prefix depth {}", state.depth()));
    }
    let mut rng = rng_for(seed, 0);
    let mut tau = BitString::new();
    let mut draw = |tau: &mut BitString, p0: f64, p1: f64| -> Result<()> {
        let total = p0 + p1;
        if !(total > ZERO_FLOOR) {
            return Err(zero_mass(tau, total));
        }
        let u: f64 = rng.gen();
        tau.push(u < (p1 / total).clamp(0.0, 1.0));
        Ok(())
    };
    if state.product_factor(1).is_some() {
        for q in 1..=n {
            let f = state.product_factor(q).unwrap();
            let bq = b.basis(q)?;
            draw(&mut tau, qubit_mass(&f, &bq[0]).max(0.0), qubit_mass(&f, &bq[1]).max(0.0))?;
        }
        return Ok(tau);
    }
    if n <= state.materialized_depth() {
        for _ in 0..n {
            let p0 = premeasure(state, b, &tau.pushed(false))?.max(0.0);
            let p1 = premeasure(state, b, &tau.pushed(true))?.max(0.0);
            draw(&mut tau, p0, p1)?;
        }
        return Ok(tau);
    }
    let f = state.factored().ok_or_else(|| QrlError::Capacity(format!("level {n} is not available")))?;
    // the blocks are independent, so conditioning only sees the current block
    for q in 1..=n {
        let (i, kept) = f.locate(q).unwrap();
        let blk = &f.blocks[i];
        let off = f.offset(i);
        let local = BitString(tau.0[off..].to_vec());
        let m = blk.chain[blk.n - kept].matrix();
        let mass = |t: &BitString| -> Result<f64> {
            let v = product_vector(&b.vectors(off, &t.0)?);
            Ok(real_part(m.quad_form(&v)?, "premeasure")?.max(0.0))
        };
        draw(&mut tau, mass(&local.pushed(false))?, mass(&local.pushed(true))?)?;
    }
    Ok(tau)
}

/// n^{-1} Σ_{i<n} Tr(ρ_n P^n_i), with P^n_i the projector onto strings whose bit i is 1.
pub fn lln_statistic(rho: &DensityMatrix) -> f64 {
    let n = rho.qubits();
    if n == 0 {
        return 0.0;
    }
    let w = rho.diagonal_weights();
    w.iter().enumerate().map(|(i, x)| x * i.count_ones() as f64).sum::<f64>() / n as f64
}

/// n^{-1} Tr(ρ_n L_n) with L_n = −log₂ μ_n and μ(0) = p.
pub fn empirical_entropy(rho: &DensityMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p = {p} outside (0,1)"));
    }
    let n = rho.qubits();
    if n == 0 {
        return domain("empirical entropy needs at least one qubit");
    }
    let (lp, lq) = (-p.log2(), -(1.0 - p).log2());
    let w = rho.diagonal_weights();
    let s: f64 = w
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let ones = i.count_ones() as f64;
            x * ((n as f64 - ones) * lp + ones * lq)
        })
        .sum();
    Ok(s / n as f64)
}

/// p^m_i = Σ_{τ∈A^m_i} |⊗ b_τ⟩⟨⊗ b_τ| for every member and level of a classical MLT.
pub fn mlt_pullback(classical: &ClassicalMlt, b: &MeasurementSystem) -> Result<QTest> {
    classical.validate()?;
    let mut members = Vec::new();
    for s in &classical.members {
        let mut levels = Vec::new();
        for (&i, set) in &s.levels {
            let idx: Vec<usize> = set.iter().copied().collect();
            let p = if b.is_standard() {
                SpecialProjection::diagonal(i, &idx)?
            } else {
                let bases = (1..=i).map(|q| b.basis(q)).collect::<Result<Vec<_>>>()?;
                let vecs: Vec<Vec<C64>> = idx
                    .iter()
                    .map(|&t| {
                        let bits = BitString::from_index(i, t);
                        product_vector(&bits.0.iter().zip(&bases).map(|(&x, bq)| bq[x as usize]).collect::<Vec<_>>())
                    })
                    .collect();
                if (1usize << i) > crate::limits::limits().dense_max_dim {
                    return capacity(format!("pullback level {i} exceeds the dense cap"));
                }
                SpecialProjection::new(crate::linalg::projector_from(1 << i, &vecs)?)?
            };
            if p.rank().to_string() != set.len().to_string() {
                return invariant(format!("pullback rank {} differs from |A| = {}", p.rank(), set.len()));
            }
            levels.push(p);
        }
        members.push(QSigmaSet::new(levels)?);
    }
    QTest::new(TestKind::Mlt, classical.first_index, Members::Sets(members), None, MassMeasure::Tracial)
}

/// Fraction of the ⌊|x|/block⌋ aligned blocks of x equal to 0^block.
pub fn block_frequency(x: &BitString, block: usize) -> Result<f64> {
    if block == 0 {
        return domain("block length must be positive");
    }
    if x.len() < block {
        return domain(format!("string of length {} shorter than block {block}", x.len()));
    }
    let chunks: Vec<&[bool]> = x.0.chunks_exact(block).collect();
    let zeros = chunks.iter().filter(|c| c.iter().all(|b| !b)).count();
    Ok(zeros as f64 / chunks.len() as f64)
}
