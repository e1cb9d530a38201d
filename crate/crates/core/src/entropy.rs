//! Von Neumann entropy of prefix levels and the entropy bounds used for randomness.

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{domain, invariant, Result};
use crate::linalg::{hermitian_eig, hermitian_eigenvalues, projector_from_sparse, trace_inner, DensityMatrix};
use crate::qtests::{binary_entropy, MassMeasure, Members, QSigmaSet, QTest, SpecialProjection, TestKind};
use crate::rational::Rational;
use crate::states::{chapter4_block, r_n, StatePrefix};

/// Eigenvalues in [−CLAMP, 0) count as zero.
pub const CLAMP: f64 = 1e-9;

fn entropy_of(vals: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for &a in vals {
        if a < -CLAMP {
            return invariant(format!("eigenvalue {a:.3e} is negative beyond tolerance"));
        }
        let a = a.clamp(0.0, 1.0);
        if a > 0.0 {
            h -= a * a.log2();
        }
    }
    Ok(h.max(0.0))
}

/// H(ρ) = −Σ α log₂ α over the eigenvalues, with 0·log 0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of(&rho.eigenvalues()?)
}

/// n − r_n 2^{1−n}.
pub fn chapter4_block_entropy(n: usize) -> f64 {
    n as f64 - r_n(n) as f64 * 2f64.powi(1 - n as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRow {
    pub n: usize,
    pub h: f64,
    pub rate: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub rows: Vec<EntropyRow>,
    /// Smallest H(ρ_n)/n over the computed range; a finite-range estimate only.
    pub liminf_estimate: f64,
    pub label: &'static str,
    pub rate_nondecreasing: bool,
    pub excess_strictly_decreasing: bool,
}

impl EntropyReport {
    fn from_rows(rows: Vec<EntropyRow>) -> Self {
        let liminf_estimate = rows.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min);
        let rate_nondecreasing = rows.windows(2).all(|w| w[1].rate >= w[0].rate - 1e-12);
        let excess_strictly_decreasing = rows.windows(2).all(|w| w[1].excess < w[0].excess);
        EntropyReport {
            rows,
            liminf_estimate,
            label: "finite-range estimate",
            rate_nondecreasing,
            excess_strictly_decreasing,
        }
    }
}

fn row(n: usize, h: f64) -> Result<EntropyRow> {
    if h > n as f64 + 1e-8 {
        return invariant(format!("H(ρ_{n}) = {h} exceeds {n}"));
    }
    Ok(EntropyRow { n, h, rate: h / n as f64, excess: h - n as f64 })
}

/// H(ρ_n) for every level of the prefix. Beyond the stored levels the entropy is summed over
/// product factors or tensor blocks.
pub fn entropy_rate_series(state: &StatePrefix) -> Result<EntropyReport> {
    let mut rows = Vec::new();
    for (i, l) in state.levels().iter().enumerate() {
        rows.push(row(i + 1, von_neumann_entropy(l)?)?);
    }
    let start = state.materialized_depth() + 1;
    if start <= state.depth() {
        if state.product_factor(1).is_some() {
            let mut h = rows.last().map_or(0.0, |r| r.h);
            for q in start..=state.depth() {
                let f = state.product_factor(q).unwrap();
                h += entropy_of(&[f[0][0].re, f[1][1].re])?;
                rows.push(row(q, h)?);
            }
        } else if let Some(f) = state.factored() {
            let mut done = 0.0;
            for (i, b) in f.blocks.iter().enumerate() {
                let off = f.offset(i);
                for kept in 1..=b.n {
                    if off + kept >= start {
                        let part = entropy_of(&b.chain[b.n - kept].eigenvalues()?)?;
                        rows.push(row(off + kept, done + part)?);
                    }
                }
                done += entropy_of(&b.full().eigenvalues()?)?;
            }
        }
    }
    Ok(EntropyReport::from_rows(rows))
}

/// Rates Σ_{n=5}^{N} H(d_n) / Σ_{n=5}^{N} n for N = 5..=n_max, block entropies from the eigensolver.
pub fn chapter4_rate_series(n_max: usize) -> Result<Vec<(usize, f64)>> {
    let mut h = 0.0;
    let mut g = 0usize;
    let mut out = Vec::new();
    for n in 5..=n_max {
        let d = chapter4_block(n)?;
        h += entropy_of(&hermitian_eigenvalues(d.matrix())?)?;
        g += n;
        out.push((n, h / g as f64));
    }
    Ok(out)
}

/// Sum of the k largest eigenvalues.
pub fn top_k_mass(rho: &DensityMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > rho.dim() {
        return domain(format!("k = {k} outside 1..={}", rho.dim()));
    }
    let vals = rho.eigenvalues()?;
    Ok(vals[..k].iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlattenedBound {
    pub m: usize,
    pub s: f64,
    pub entropy: f64,
    pub bound: f64,
    pub holds: bool,
}

/// S_{m,n} = top 2^{n−m} mass; bound 1 − m S + n; holds iff H(ρ_n) ≤ bound + 1e−8.
pub fn flattened_entropy_bound(rho: &DensityMatrix, m: usize) -> Result<FlattenedBound> {
    let n = rho.qubits();
    if m >= n {
        return domain(format!("m = {m} must be below n = {n}"));
    }
    let vals = rho.eigenvalues()?;
    let s: f64 = vals[..1usize << (n - m)].iter().sum();
    let entropy = entropy_of(&vals)?;
    let bound = 1.0 - m as f64 * s + n as f64;
    Ok(FlattenedBound { m, s, entropy, bound, holds: entropy <= bound + 1e-8 })
}

/// r^m_n: S 2^{m−n} on the first 2^{n−m} entries and (1−S)/(2^n − 2^{n−m}) on the rest.
pub fn flattened_distribution(rho: &DensityMatrix, m: usize) -> Result<Vec<f64>> {
    let n = rho.qubits();
    if m == 0 || m >= n {
        return domain(format!("flattening needs 1 ≤ m < n, got m = {m}, n = {n}"));
    }
    let vals = rho.eigenvalues()?;
    let k = 1usize << (n - m);
    let s: f64 = vals[..k].iter().sum();
    let rest = (1usize << n) - k;
    let mut r = vec![s / k as f64; k];
    r.extend(std::iter::repeat_n((1.0 - s) / rest as f64, rest));
    Ok(r)
}

/// h(S) − mS + n + (1−S) log₂(1 − 2^{−m}).
pub fn flattened_entropy(s: f64, m: usize, n: usize) -> f64 {
    binary_entropy(s) - m as f64 * s + n as f64 + (1.0 - s) * (1.0 - 2f64.powi(-(m as i32))).log2()
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    entropy_of(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenmassWitness {
    pub m: usize,
    pub n: usize,
    /// ⌈2^{nε}⌉.
    pub k: String,
    pub top_mass: f64,
    pub trace: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct EigenmassTest {
    pub witnesses: Vec<EigenmassWitness>,
    /// Members G^m for the run of consecutive m starting at the first witness.
    pub test: QTest,
}

/// 2^{nε} + 1 < 2^{n−m}, decided exactly.
fn level_small_enough(eps: &Rational, n: usize, m: usize) -> bool {
    if m >= n {
        return false;
    }
    let k = eps.ceil_pow2(n as u64);
    let cap = (BigUint::from(1u32) << (n - m)) - BigUint::from(1u32);
    let exact = (n as u64 * eps.num()).is_multiple_of(eps.den());
    k < cap || (k == cap && !exact)
}

/// Searches, for m = 0..=m_max, the first level n with 2^{nε}+1 < 2^{n−m} and top-⌈2^{nε}⌉ mass > δ.
pub fn eigenmass_concentration_test(
    state: &StatePrefix,
    eps: &Rational,
    delta: &Rational,
    m_max: usize,
) -> Result<Option<EigenmassTest>> {
    if !eps.in_unit_interval() {
        return domain(format!("ε = {eps} outside (0,1)"));
    }
    let d = delta.to_f64();
    let mut witnesses = Vec::new();
    let mut members = Vec::new();
    for m in 0..=m_max {
        let mut hit = None;
        for n in 1..=state.materialized_depth() {
            if !level_small_enough(eps, n, m) {
                continue;
            }
            let k = eps.ceil_pow2(n as u64);
            let ku: usize = match k.to_string().parse() {
                Ok(v) if v <= 1usize << n => v,
                _ => continue,
            };
            let rho = state.level(n)?;
            let vals = rho.eigenvalues()?;
            let top: f64 = vals[..ku].iter().sum();
            if top > d {
                hit = Some((n, k, ku, top));
                break;
            }
        }
        let Some((n, k, ku, top)) = hit else {
            if members.is_empty() {
                continue;
            }
            break;
        };
        let rho = state.level(n)?;
        let g = if rho.is_diagonal() {
            let w = rho.diagonal_weights();
            let mut idx: Vec<usize> = (0..w.len()).collect();
            idx.sort_by(|a, b| w[*b].total_cmp(&w[*a]).then(a.cmp(b)));
            SpecialProjection::diagonal(n, &idx[..ku])?
        } else {
            let eig = hermitian_eig(rho.matrix())?;
            SpecialProjection::new(projector_from_sparse(rho.dim(), &eig.eigenvectors[..ku])?)?
        };
        let trace = trace_inner(rho, &g.to_matrix()?)?;
        if !(trace > d) {
            return invariant(format!("level {n}: Tr(ρG) = {trace} does not exceed δ = {d}"));
        }
        witnesses.push(EigenmassWitness { m, n, k: k.to_string(), top_mass: top, trace, tau: g.tau() });
        members.push(QSigmaSet::single(g));
    }
    if members.is_empty() {
        return Ok(None);
    }
    let first = witnesses[0].m;
    let test = QTest::new(TestKind::Mlt, first, Members::Sets(members), None, MassMeasure::Tracial)?;
    Ok(Some(EigenmassTest { witnesses, test }))
}

#[cfg(test)]
mod tests;
