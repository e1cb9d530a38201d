use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::Serialize;

use super::classical::{ClassicalMlt, ClassicalSigma};
use super::projection::{level_trace, SpecialProjection};
use super::sets::{MassMeasure, Members, QSigmaSet, QTest, TestKind};
use crate::binom::{binom_row, ratio_pow2, weighted_binomial_sum};
use crate::error::{capacity, domain, invariant, QrlError, Result};
use crate::limits::limits;
use crate::linalg::{hermitian_eig, projector_from_sparse, ComplexMatrix};
use crate::rational::Rational;
use crate::states::{chapter4_block, r_n, StatePrefix};

/// First N ≥ 5 with ∏_{n=5}^{N} (1 − 1/n + 2^{-n}) < 2^{-m}.
pub fn chapter4_n_of_m(m: usize) -> usize {
    let target = 2f64.powi(-(m as i32));
    let mut prod = 1.0;
    let mut n = 5;
    loop {
        prod *= 1.0 - 1.0 / n as f64 + 2f64.powi(-(n as i32));
        if prod < target {
            return n;
        }
        n += 1;
    }
}

/// Projector onto the eigenvectors of d_n with nonzero eigenvalue.
pub fn chapter4_block_projector(n: usize) -> Result<SpecialProjection> {
    let d = chapter4_block(n)?;
    let eig = hermitian_eig(d.matrix())?;
    let vecs: Vec<_> =
        eig.eigenvalues.iter().zip(&eig.eigenvectors).filter(|(a, _)| **a > 1e-12).map(|(_, v)| v.clone()).collect();
    let p = SpecialProjection::new(projector_from_sparse(d.dim(), &vecs)?)?;
    let want = BigUint::from((1usize << n) - r_n(n));
    if *p.rank() != want {
        return invariant(format!("rank of Π_{n} is {} instead of {want}", p.rank()));
    }
    Ok(p)
}

/// ⊗_{n=5}^{N} Π_n, the projector onto span M_N.
pub fn chapter4_projector(big_n: usize) -> Result<SpecialProjection> {
    if big_n < 5 {
        return domain("chapter-4 projector needs N ≥ 5");
    }
    let blocks = (5..=big_n).map(chapter4_block_projector).collect::<Result<Vec<_>>>()?;
    Ok(SpecialProjection::factored(blocks))
}

/// |M_N| = ∏_{n=5}^{N} (2^n − r_n).
pub fn chapter4_m_size(big_n: usize) -> BigUint {
    (5..=big_n).fold(BigUint::from(1u32), |acc, n| acc * BigUint::from((1usize << n) - r_n(n)))
}

/// The chapter-4 test with members T_0..=T_m.
#[derive(Debug, Clone)]
pub struct Chapter4Mlt {
    pub test: QTest,
    /// N(m) for the last member.
    pub n: usize,
    pub tau: f64,
}

pub fn build_chapter4_mlt(m: usize, capacity_n: usize) -> Result<Chapter4Mlt> {
    let big_n = chapter4_n_of_m(m);
    let cap = capacity_n.min(limits().factored_max_block);
    if big_n > cap {
        return capacity(format!("T_{m} needs N(m) = {big_n}, above capacity {cap}"));
    }
    let members =
        (0..=m).map(|j| chapter4_projector(chapter4_n_of_m(j)).map(QSigmaSet::single)).collect::<Result<Vec<_>>>()?;
    let test = QTest::new(TestKind::Mlt, 0, Members::Sets(members), None, MassMeasure::Tracial)?;
    let tau = match test.members() {
        Members::Sets(v) => v[m].tau(),
        _ => unreachable!(),
    };
    if tau >= 2f64.powi(-(m as i32)) {
        return invariant(format!("τ(T_{m}) = {tau} is not below 2^-{m}"));
    }
    Ok(Chapter4Mlt { test, n: big_n, tau })
}

/// Q^m: at level n, the projector onto the span of range(G^i_n) for m ≤ i ≤ n.
pub fn nest(tests: &[QSigmaSet], first_index: usize, m: usize) -> Result<QSigmaSet> {
    if m < first_index || m >= first_index + tests.len() {
        return domain(format!("index {m} outside the member range"));
    }
    let used = &tests[m - first_index..];
    let keys: BTreeSet<usize> = used[0].levels().keys().copied().collect();
    if used.iter().any(|g| g.levels().keys().copied().collect::<BTreeSet<_>>() != keys) {
        return domain("member levels are not aligned");
    }
    let mut out = Vec::new();
    for &n in &keys {
        let dim = 1usize << n;
        let mut sum = ComplexMatrix::zeros_sparse(dim, dim);
        for (j, g) in used.iter().enumerate() {
            if m + j > n {
                break;
            }
            sum = sum.add(&g.level(n).unwrap().to_matrix()?)?;
        }
        let sum = sum.assume_hermitian();
        let eig = hermitian_eig(&sum)?;
        let vecs: Vec<_> =
            eig.eigenvalues.iter().zip(&eig.eigenvectors).filter(|(a, _)| **a > 1e-9).map(|(_, v)| v.clone()).collect();
        let p = SpecialProjection::new(projector_from_sparse(dim, &vecs)?)?;
        if n + 1 >= m {
            let cap = BigUint::from(1u32) << (n + 1 - m);
            if *p.rank() >= cap {
                return invariant(format!("nested level {n} has rank {} ≥ 2^{}", p.rank(), n + 1 - m));
            }
        }
        out.push(p);
    }
    QSigmaSet::new(out)
}

fn check_delta(delta: &Rational) -> Result<f64> {
    if !delta.in_unit_interval() {
        return domain(format!("δ = {delta} outside (0,1)"));
    }
    Ok(delta.to_f64())
}

fn diagonal_cap(n: usize) -> Result<()> {
    if n > limits().diagonal_max_qubits {
        return capacity(format!("level {n} too large to enumerate basis strings"));
    }
    Ok(())
}

/// T^m_n = {σ : ⟨σ|G^m_n|σ⟩ > δ/4} for every member and level of an MLT.
pub fn diagonal_mlt_conversion(g: &QTest, delta: &Rational) -> Result<ClassicalMlt> {
    let d = check_delta(delta)?;
    if g.kind() != TestKind::Mlt {
        return domain("conversion needs an MLT");
    }
    let sets = match g.members() {
        Members::Sets(v) => v,
        _ => unreachable!(),
    };
    let mut members = Vec::new();
    for (j, s) in sets.iter().enumerate() {
        let m = g.first_index() + j;
        let mut levels = BTreeMap::new();
        let mut sup = 0.0f64;
        for (&n, p) in s.levels() {
            diagonal_cap(n)?;
            let t: BTreeSet<usize> = (0..1usize << n).filter(|&i| p.diagonal_entry(i) > d / 4.0).collect();
            let tr = crate::binom::big_to_f64(p.rank());
            if !t.is_empty() && !((t.len() as f64) < 4.0 / d * tr) {
                return invariant(format!(
                    "member {m} level {n}: |T| = {} not below (4/δ)·Tr(G) = {}",
                    t.len(),
                    4.0 / d * tr
                ));
            }
            sup = sup.max(t.len() as f64 / (1u64 << n) as f64);
            levels.insert(n, t);
        }
        let bound = 2f64.powi(-(m as i32)) * 4.0 / d;
        if sup > 0.0 && !(sup < bound) {
            return invariant(format!("member {m}: μ(C) = {sup} not below 2^-{m}·4/δ = {bound}"));
        }
        let cs = ClassicalSigma { levels };
        cs.check_upward_closed().map_err(|e| QrlError::Invariant(format!("member {m}: {e}")))?;
        members.push(cs);
    }
    Ok(ClassicalMlt { first_index: g.first_index(), members })
}

/// C^m_t = {σ ∈ 2^t : Σ_{k≤t} |⟨σ|S^k_t|σ⟩| > 2^{m−1}δ} for every level t present in the test.
pub fn solovay_to_mlt_diagonal(s: &QTest, delta: &Rational, m: usize) -> Result<ClassicalSigma> {
    let d = check_delta(delta)?;
    if s.kind() != TestKind::Solovay {
        return domain("conversion needs a Solovay test");
    }
    let sets = match s.members() {
        Members::Sets(v) => v,
        _ => unreachable!(),
    };
    let levels: BTreeSet<usize> = sets.iter().flat_map(|g| g.levels().keys().copied()).collect();
    let threshold = 2f64.powi(m as i32 - 1) * d;
    let mut out = BTreeMap::new();
    for t in levels {
        diagonal_cap(t)?;
        let active: Vec<&SpecialProjection> =
            sets.iter().enumerate().filter(|(j, _)| s.first_index() + j <= t).filter_map(|(_, g)| g.level(t)).collect();
        let total_trace: f64 = active.iter().map(|p| crate::binom::big_to_f64(p.rank())).sum();
        let c: BTreeSet<usize> = (0..1usize << t)
            .filter(|&i| active.iter().map(|p| p.diagonal_entry(i).abs()).sum::<f64>() > threshold)
            .collect();
        if !c.is_empty() && !((c.len() as f64) * threshold < total_trace) {
            return invariant(format!(
                "level {t}: |C|·2^(m-1)δ = {} not below Σ Tr(S^k_t) = {total_trace}",
                c.len() as f64 * threshold
            ));
        }
        out.insert(t, c);
    }
    Ok(ClassicalSigma { levels: out })
}

/// One level of the LLN test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnLevel {
    pub n: usize,
    #[serde(serialize_with = "ser_big")]
    pub count: BigUint,
    pub tau: f64,
    pub chernoff: f64,
}

fn ser_big<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

#[derive(Debug, Clone)]
pub struct LlnTest {
    pub test: QTest,
    pub levels: Vec<LlnLevel>,
}

/// |C_n| = #{σ ∈ 2^n : #ones(σ) > n(½ + δ/2)}.
pub fn lln_member(delta: &Rational, n: usize) -> Result<SpecialProjection> {
    let (a, b) = (delta.num() as u128, delta.den() as u128);
    let member = (0..=n).map(|k| 2 * b * k as u128 > n as u128 * (b + a)).collect();
    SpecialProjection::counting(n, false, member)
}

pub fn lln_schnorr_test(delta: &Rational, n_max: usize) -> Result<LlnTest> {
    let d = check_delta(delta)?;
    let mut members = Vec::new();
    let mut levels = Vec::new();
    for n in 1..=n_max {
        let p = lln_member(delta, n)?;
        let tau = p.tau();
        let chernoff = 2.0 * (-0.5 * n as f64 * d * d).exp();
        if tau > chernoff {
            return invariant(format!("level {n}: τ(S_n) = {tau} exceeds 2exp(-nδ²/2) = {chernoff}"));
        }
        levels.push(LlnLevel { n, count: p.rank().clone(), tau, chernoff });
        members.push(p);
    }
    let declared: f64 = levels.iter().map(|l| l.tau).sum();
    let test = QTest::new(TestKind::Schnorr, 1, Members::Projections(members), Some(declared), MassMeasure::Tracial)?;
    Ok(LlnTest { test, levels })
}

/// Shannon entropy in bits of the distribution (p, 1−p).
pub fn binary_entropy(p: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}

/// One level of the SMB test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmbLevel {
    pub n: usize,
    pub mu_mass: f64,
    /// 2exp(−nδ²/2).
    pub chernoff: f64,
    pub chernoff_holds: bool,
    /// exp(−nδ²/(2c²)) with c = |log₂((1−p)/p)|.
    pub hoeffding: f64,
}

#[derive(Debug, Clone)]
pub struct SmbTest {
    pub test: QTest,
    pub levels: Vec<SmbLevel>,
}

/// Zero-count membership flags of C_n = {σ : −n^{-1} log μ(σ) > δ/2 + h}.
pub fn smb_member(p: f64, delta: f64, n: usize) -> Result<SpecialProjection> {
    let h = binary_entropy(p);
    let (lp, lq) = (p.log2(), (1.0 - p).log2());
    let member = (0..=n).map(|k| -(k as f64 * lp + (n - k) as f64 * lq) / n as f64 > delta / 2.0 + h).collect();
    SpecialProjection::counting(n, true, member)
}

pub fn smb_test(p: f64, delta: &Rational, n_max: usize) -> Result<SmbTest> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("p = {p} outside (0,1)"));
    }
    let d = check_delta(delta)?;
    let c = ((1.0 - p) / p).log2().abs();
    let mut members = Vec::new();
    let mut levels = Vec::new();
    for n in 1..=n_max {
        let s = smb_member(p, d, n)?;
        let flags = match s.repr() {
            super::projection::ProjectionRepr::Counting { member, .. } => member.clone(),
            _ => unreachable!(),
        };
        let mu_mass = weighted_binomial_sum(n, p, 1.0 - p, |k| flags[k]);
        let chernoff = 2.0 * (-0.5 * n as f64 * d * d).exp();
        let hoeffding = if c == 0.0 { 0.0 } else { (-(n as f64) * d * d / (2.0 * c * c)).exp() };
        if mu_mass > hoeffding + 1e-12 {
            return invariant(format!("level {n}: μ(C_n) = {mu_mass} exceeds the Hoeffding bound {hoeffding}"));
        }
        levels.push(SmbLevel { n, mu_mass, chernoff, chernoff_holds: mu_mass <= chernoff, hoeffding });
        members.push(s);
    }
    let declared: f64 = levels.iter().map(|l| l.mu_mass).sum();
    let test =
        QTest::new(TestKind::Schnorr, 1, Members::Projections(members), Some(declared), MassMeasure::Bernoulli(p))?;
    Ok(SmbTest { test, levels })
}

/// |C_n| by exact binomial sums, for cross-checks.
pub fn lln_count(delta: &Rational, n: usize) -> BigUint {
    let (a, b) = (delta.num() as u128, delta.den() as u128);
    binom_row(n).into_iter().enumerate().filter(|(k, _)| 2 * b * *k as u128 > n as u128 * (b + a)).map(|(_, c)| c).sum()
}

/// Index i with Tr(ρ^i_n p) > δ, given Σ w_i Tr(ρ^i_n p) > δ.
pub fn convexity_pigeonhole(
    components: &[StatePrefix],
    weights: &[f64],
    p: &SpecialProjection,
    delta: f64,
) -> Result<usize> {
    if components.len() != weights.len() || components.is_empty() {
        return domain("need one weight per component");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 || weights.iter().any(|w| *w < 0.0) {
        return domain(format!("weights sum to {total}"));
    }
    let traces = components.iter().map(|c| level_trace(c, p)).collect::<Result<Vec<_>>>()?;
    let mix: f64 = traces.iter().zip(weights).map(|(t, w)| t * w).sum();
    if !(mix > delta) {
        return domain(format!("mixture trace {mix} does not exceed δ = {delta}"));
    }
    traces
        .iter()
        .position(|t| *t > delta)
        .ok_or_else(|| QrlError::Invariant("no component exceeds δ although the mixture does".into()))
}

/// τ(T_m) from the |M_N| product formula.
pub fn chapter4_tau(big_n: usize) -> f64 {
    ratio_pow2(&chapter4_m_size(big_n), crate::states::gamma(big_n))
}
