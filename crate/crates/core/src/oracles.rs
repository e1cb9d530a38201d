//! Randomized verification of the linear-algebra lemmas at desk scale.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{inner, norm, product_vector, top_eigvec_in_complement, ComplexMatrix, C64, ONE, ZERO};
use crate::rng::rng_for;
use crate::states::chapter4_block;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutcome {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest slack (bound minus value, or value minus bound) seen; negative means violated.
    pub worst_margin: f64,
    pub details: Vec<String>,
    /// Set when no admissible input was found, so nothing could be checked.
    pub inconclusive: bool,
}

impl OracleOutcome {
    fn new(name: &str) -> Self {
        OracleOutcome {
            name: name.into(),
            trials: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            details: Vec::new(),
            inconclusive: false,
        }
    }

    fn record(&mut self, margin: f64, detail: impl FnOnce() -> String) {
        self.worst_margin = self.worst_margin.min(margin);
        if margin < 0.0 {
            self.violations += 1;
            if self.details.len() < 20 {
                self.details.push(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && !self.inconclusive
    }

    fn merge(&mut self, other: OracleOutcome) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self.inconclusive |= other.inconclusive;
        for d in other.details {
            if self.details.len() < 20 {
                self.details.push(d);
            }
        }
    }
}

fn gauss(rng: &mut ChaCha20Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random unit vector in ℂ², Gaussian direction.
pub fn random_unit_pair(rng: &mut ChaCha20Rng) -> [C64; 2] {
    loop {
        let v = [gauss(rng), gauss(rng)];
        let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if nv > 1e-6 {
            return [v[0] / nv, v[1] / nv];
        }
    }
}

/// Columns of a Haar-random unitary: Ginibre matrix orthonormalized by Gram-Schmidt.
pub fn random_unitary_columns(dim: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<C64>> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| gauss(rng)).collect();
        for _ in 0..2 {
            for c in &cols {
                let p = inner(c, &v);
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-6 {
            v.iter_mut().for_each(|x| *x /= nv);
            cols.push(v);
        }
    }
    cols
}

/// Σ |v⟩⟨v| as a dense matrix of any dimension.
fn dense_projector(dim: usize, vs: &[Vec<C64>]) -> ComplexMatrix {
    let mut d = vec![ZERO; dim * dim];
    for v in vs {
        for i in 0..dim {
            for j in 0..dim {
                d[i * dim + j] += v[i] * v[j].conj();
            }
        }
    }
    ComplexMatrix::dense(dim, dim, d).unwrap().assume_hermitian()
}

/// G G† / Tr for a Ginibre matrix G.
pub fn random_density(dim: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
    let g = ComplexMatrix::dense(dim, dim, (0..dim * dim).map(|_| gauss(rng)).collect()).unwrap();
    let p = g.mul(&g.adjoint()).unwrap();
    let tr = p.trace().re;
    p.scale(C64::new(1.0 / tr, 0.0)).assume_hermitian()
}

fn tr(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.trace_product(b).unwrap().re
}

/// Result of the greedy construction behind the subspace approximation.
#[derive(Debug, Clone)]
pub struct LinaConstruction {
    pub d: f64,
    pub vectors: Vec<Vec<C64>>,
    pub m_proj: ComplexMatrix,
}

/// Greedy maximal orthonormal D with Σ_k ⟨ψ|M_k|ψ⟩ > mδ/6, by top eigenvectors of the compressed Σ_k M_k.
pub fn lina_construct(dim: usize, family: &[ComplexMatrix], delta: f64, m: usize) -> Result<LinaConstruction> {
    if family.iter().any(|f| f.rows() != dim || f.cols() != dim) {
        return domain("family member dimension mismatch");
    }
    let mut a = ComplexMatrix::zeros_dense(dim, dim);
    for f in family {
        a = a.add(&f.to_dense()?)?;
    }
    let a = a.assume_hermitian();
    let d = a.trace().re;
    let threshold = m as f64 * delta / 6.0;
    let mut vectors: Vec<Vec<C64>> = Vec::new();
    loop {
        let e = top_eigvec_in_complement(&a, &vectors)?;
        if e.exhausted || !(e.value > threshold) {
            break;
        }
        vectors.push(e.vector);
    }
    let m_proj = dense_projector(dim, &vectors);
    Ok(LinaConstruction { d, vectors, m_proj })
}

/// Checks Tr(M) ≤ 6d/(δm) and Tr(Mρ) ≥ δ²/36 for sampled ρ in Q.
pub fn verify_lina(
    dim: usize,
    family: &[ComplexMatrix],
    delta: f64,
    m: usize,
    q_samples: usize,
    seed: u64,
) -> Result<OracleOutcome> {
    if !(delta > 0.0 && delta < 1.0) || m == 0 {
        return domain("verify_lina needs δ ∈ (0,1) and m ≥ 1");
    }
    if dim > 64 {
        return domain(format!("dimension {dim} above 64"));
    }
    let mut out = OracleOutcome::new("lina");
    let c = lina_construct(dim, family, delta, m)?;
    let rank = c.vectors.len() as f64;
    let rank_bound = 6.0 * c.d / (delta * m as f64);
    out.record(rank_bound - rank, || format!("Tr(M) = {rank} > 6d/(δm) = {rank_bound}"));
    if family.len() < m {
        out.inconclusive = true;
        out.details.push("Q is empty: fewer than m subspaces".into());
        return Ok(out);
    }
    let mut rng = rng_for(seed, 1);
    let floor = delta * delta / 36.0;
    let budget = q_samples * 50;
    let mut accepted = 0;
    for _ in 0..budget {
        if accepted == q_samples {
            break;
        }
        // pick m members, build a state concentrated on them, mix in a uniform random state
        let mut idx: Vec<usize> = (0..family.len()).collect();
        for i in 0..m {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        let mut pi = ComplexMatrix::zeros_dense(dim, dim);
        for &k in &idx[..m] {
            let g = random_density(dim, &mut rng);
            let f = family[k].to_dense()?;
            let s = f.mul(&g)?.mul(&f)?;
            let t = s.trace().re;
            if t > 1e-12 {
                pi = pi.add(&s.scale(C64::new(1.0 / (t * m as f64), 0.0)))?;
            }
        }
        let w: f64 = rng.gen_range(0.0..0.5);
        let sigma = random_density(dim, &mut rng);
        let total = pi.trace().re;
        if total < 1e-12 {
            continue;
        }
        let rho = pi.scale(C64::new((1.0 - w) / total, 0.0)).add(&sigma.scale(C64::new(w, 0.0)))?;
        let hits = family.iter().filter(|f| tr(&rho, f) > delta).count();
        if hits < m {
            continue;
        }
        accepted += 1;
        let val = tr(&rho, &c.m_proj);
        out.record(val - floor, || format!("Tr(Mρ) = {val} < δ²/36 = {floor}"));
    }
    out.trials = accepted;
    if accepted == 0 {
        out.inconclusive = true;
        out.details.push(format!("no member of Q found in {budget} draws"));
    }
    Ok(out)
}

/// Random family of `count` subspaces of ℂ^dim with dimensions in 1..=max_rank, as projectors.
pub fn random_family(dim: usize, count: usize, max_rank: usize, rng: &mut ChaCha20Rng) -> Vec<ComplexMatrix> {
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=max_rank.max(1).min(dim));
            let cols = random_unitary_columns(dim, rng);
            dense_projector(dim, &cols[..k])
        })
        .collect()
}

/// |{e_i : ⟨e_i|F|e_i⟩ > δ}| < δ^{-1} Tr(F) for random bases E and projectors F.
pub fn verify_lemma30(dim: usize, trials: usize, seed: u64) -> Result<OracleOutcome> {
    if dim == 0 || dim > 1 << 12 {
        return domain(format!("dimension {dim} outside 1..=4096"));
    }
    let mut out = OracleOutcome::new("lemma30");
    for t in 0..trials {
        let mut rng = rng_for(seed, 1000 + t as u64);
        let basis = random_unitary_columns(dim, &mut rng);
        let rank = rng.gen_range(0..=dim);
        let f = random_unitary_columns(dim, &mut rng);
        let f = &f[..rank];
        let delta: f64 = rng.gen_range(f64::EPSILON..1.0);
        let count = lemma30_count(&basis, f, delta);
        let bound = rank as f64 / delta;
        // count = 0 with F = 0 is the vacuous case
        let ok = count == 0 || (count as f64) < bound;
        let margin = if ok { bound - count as f64 } else { -1.0 };
        out.record(margin, || format!("trial {t}: count {count} not below Tr(F)/δ = {bound}"));
        out.trials += 1;
    }
    Ok(out)
}

/// #{i : Σ_j |⟨f_j|e_i⟩|² > δ}.
pub fn lemma30_count(basis: &[Vec<C64>], f: &[Vec<C64>], delta: f64) -> usize {
    basis.iter().filter(|e| f.iter().map(|v| inner(v, e).norm_sqr()).sum::<f64>() > delta).count()
}

/// |v_k||v_{2^n−1−k}| = ∏ |a_i||b_i| for V = ⊗ [a_i, b_i].
pub fn verify_kron_antidiagonal(n: usize, trials: usize, seed: u64) -> Result<OracleOutcome> {
    if n == 0 || n > 12 {
        return domain(format!("n = {n} outside 1..=12"));
    }
    let mut out = OracleOutcome::new("kron_antidiagonal");
    for t in 0..trials {
        let mut rng = rng_for(seed, 2000 + t as u64);
        let pairs: Vec<[C64; 2]> = (0..n).map(|_| random_unit_pair(&mut rng)).collect();
        let dev = kron_antidiagonal_deviation(&pairs);
        out.record(1e-10 - dev, || format!("trial {t}: deviation {dev:.3e}"));
        out.trials += 1;
    }
    Ok(out)
}

/// Largest |v_k||v_{2^n−1−k}| − ∏|a_i||b_i| over k < 2^{n−1}.
pub fn kron_antidiagonal_deviation(pairs: &[[C64; 2]]) -> f64 {
    let v = product_vector(pairs);
    let want: f64 = pairs.iter().map(|p| p[0].norm() * p[1].norm()).product();
    let dim = v.len();
    (0..dim / 2).map(|k| (v[k].norm() * v[dim - 1 - k].norm() - want).abs()).fold(0.0, f64::max)
}

/// 2^{-n}(1 − 2/n) ≤ |⟨W|d_n|W⟩| ≤ 2^{-n}(1 + 2/n) for random product W.
pub fn verify_dn_quadform(n: usize, trials: usize, seed: u64) -> Result<OracleOutcome> {
    if !(5..=16).contains(&n) {
        return domain(format!("n = {n} outside 5..=16"));
    }
    let d = chapter4_block(n)?;
    let mut out = OracleOutcome::new("dn_quadform");
    let scale = 2f64.powi(-(n as i32));
    let (lo, hi) = (scale * (1.0 - 2.0 / n as f64), scale * (1.0 + 2.0 / n as f64));
    for t in 0..trials {
        let mut rng = rng_for(seed, 3000 + t as u64);
        let pairs: Vec<[C64; 2]> = (0..n).map(|_| random_unit_pair(&mut rng)).collect();
        let q = d.matrix().quad_form(&product_vector(&pairs))?.norm();
        out.record(((q - lo).min(hi - q)) / scale, || {
            format!("trial {t}: |⟨W|d_n|W⟩| = {q:.6e} outside [{lo:.6e}, {hi:.6e}]")
        });
        out.trials += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    Zero,
    ScaledIdentity,
}

/// Single-qubit probes used by the atomic-vector arguments.
pub fn probe_vectors() -> [[C64; 2]; 5] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [ONE, ZERO],
        [ZERO, ONE],
        [C64::new(h, 0.0), C64::new(h, 0.0)],
        [C64::new(h, 0.0), C64::new(0.0, h)],
        [C64::new(0.0, 0.5), C64::new(3f64.sqrt() / 2.0, 0.0)],
    ]
}

/// v†Ev for every v in the n-fold tensor powers of the probe set, via E' = Σ_ab conj(p_a) p_b E_ab.
pub fn probe_values(e: &ComplexMatrix) -> Result<Vec<C64>> {
    let dim = e.rows();
    if !e.is_square() || dim == 0 || !dim.is_power_of_two() {
        return domain(format!("{}x{} is not a 2^n square matrix", e.rows(), e.cols()));
    }
    let mut mats: Vec<(usize, Vec<C64>)> = vec![(dim, e.dense_data())];
    let probes = probe_vectors();
    while mats[0].0 > 1 {
        let mut next = Vec::with_capacity(mats.len() * probes.len());
        for (d, m) in &mats {
            let h = d / 2;
            for p in &probes {
                let mut r = vec![ZERO; h * h];
                for a in 0..2 {
                    for b in 0..2 {
                        let w = p[a].conj() * p[b];
                        if w == ZERO {
                            continue;
                        }
                        for i in 0..h {
                            for j in 0..h {
                                r[i * h + j] += w * m[(a * h + i) * d + b * h + j];
                            }
                        }
                    }
                }
                next.push((h, r));
            }
        }
        mats = next;
    }
    Ok(mats.into_iter().map(|(_, m)| m[0]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeVerdict {
    pub probes: usize,
    pub max_probe_deviation: f64,
    /// Every probe matches the target within 1e-9.
    pub probes_consistent: bool,
    /// E equals the target matrix entrywise within 1e-9.
    pub direct_consistent: bool,
}

/// Evaluates the probe family against 0 or 2^{-n}, and compares with direct matrix equality.
pub fn verify_atomic_probes(e: &ComplexMatrix, mode: ProbeMode) -> Result<ProbeVerdict> {
    let dim = e.rows();
    let vals = probe_values(e)?;
    if dim > 1 << 8 {
        return domain("atomic probes support at most 8 qubits");
    }
    if mode == ProbeMode::ScaledIdentity && e.hermitian_deviation() > 1e-10 {
        return domain("scaled-identity mode needs a Hermitian matrix");
    }
    let target = match mode {
        ProbeMode::Zero => 0.0,
        ProbeMode::ScaledIdentity => 1.0 / dim as f64,
    };
    let max_probe_deviation = vals.iter().map(|v| (v - target).norm()).fold(0.0, f64::max);
    let reference = ComplexMatrix::diagonal_real(&vec![target; dim]);
    let direct = e.max_abs_diff(&reference)?;
    Ok(ProbeVerdict {
        probes: vals.len(),
        max_probe_deviation,
        probes_consistent: max_probe_deviation <= 1e-9,
        direct_consistent: direct <= 1e-9,
    })
}

fn random_hermitian(dim: usize, rng: &mut ChaCha20Rng) -> ComplexMatrix {
    let g = ComplexMatrix::dense(dim, dim, (0..dim * dim).map(|_| gauss(rng)).collect()).unwrap();
    g.add(&g.adjoint()).unwrap().scale(C64::new(0.5, 0.0)).assume_hermitian()
}

/// Alternates exact 2^{-n}I with random perturbations of it; a violation is a probe verdict that
/// disagrees with direct comparison.
pub fn atomic_probe_sweep(trials: usize, seed: u64) -> Result<OracleOutcome> {
    let mut out = OracleOutcome::new("atomic_probes");
    for t in 0..trials {
        let mut rng = rng_for(seed, 4000 + t as u64);
        let n = rng.gen_range(1..=6);
        let dim = 1usize << n;
        let id = ComplexMatrix::diagonal_real(&vec![1.0 / dim as f64; dim]).to_dense()?;
        let (e, mode) = match t % 4 {
            0 => (id, ProbeMode::ScaledIdentity),
            1 => {
                let scale: f64 = 10f64.powf(rng.gen_range(-6.0..0.0));
                let h = random_hermitian(dim, &mut rng).scale(C64::new(scale, 0.0));
                (id.add(&h)?.assume_hermitian(), ProbeMode::ScaledIdentity)
            }
            2 => (ComplexMatrix::zeros_dense(dim, dim), ProbeMode::Zero),
            _ => {
                let g = ComplexMatrix::dense(dim, dim, (0..dim * dim).map(|_| gauss(&mut rng)).collect())?;
                (g.scale(C64::new(1e-3, 0.0)), ProbeMode::Zero)
            }
        };
        let v = verify_atomic_probes(&e, mode)?;
        let agree = v.probes_consistent == v.direct_consistent;
        out.record(if agree { 1.0 } else { -1.0 }, || {
            format!("trial {t}: probes say {}, direct comparison says {}", v.probes_consistent, v.direct_consistent)
        });
        out.trials += 1;
    }
    Ok(out)
}

/// Which oracle to run from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    All,
    Lina,
    Lemma30,
    Kron,
    Dn,
    Atomic,
}

impl std::str::FromStr for Check {
    type Err = crate::QrlError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Check::All,
            "lina" => Check::Lina,
            "lemma30" => Check::Lemma30,
            "kron" => Check::Kron,
            "dn" => Check::Dn,
            "atomic" => Check::Atomic,
            _ => return Err(crate::QrlError::Parse(format!("unknown check `{s}`"))),
        })
    }
}

/// Sizes of the standard sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub lina_families: usize,
    pub lina_samples: usize,
    pub lemma30_trials: usize,
    pub kron_trials: usize,
    pub dn_trials: usize,
    pub atomic_trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lina_families: 50,
            lina_samples: 200,
            lemma30_trials: 1000,
            kron_trials: 100,
            dn_trials: 1000,
            atomic_trials: 200,
        }
    }
}

const LINA_DIMS: [usize; 8] = [2, 3, 5, 8, 12, 16, 32, 64];

/// Lina over `families` random families with dimensions cycling through 2..=64.
pub fn lina_sweep(families: usize, samples: usize, seed: u64) -> Result<OracleOutcome> {
    let mut out = OracleOutcome::new("lina");
    let mut conclusive = 0;
    for i in 0..families {
        let mut rng = rng_for(seed, 5000 + i as u64);
        let dim = LINA_DIMS[i % LINA_DIMS.len()];
        let count = rng.gen_range(1..=6);
        let family = random_family(dim, count, (dim / 4).max(1), &mut rng);
        let m = rng.gen_range(1..=count.min(2));
        let delta: f64 = rng.gen_range(0.05..0.4);
        let o = verify_lina(dim, &family, delta, m, samples, seed.wrapping_add(i as u64))?;
        if !o.inconclusive {
            conclusive += 1;
        }
        let inconclusive = o.inconclusive;
        out.merge(OracleOutcome { inconclusive: false, ..o });
        if inconclusive {
            out.details.push(format!("family {i} (dim {dim}) inconclusive"));
        }
    }
    out.inconclusive = conclusive == 0;
    Ok(out)
}

/// The standard sweep for one check, or all of them.
pub fn run_checks(check: Check, seed: u64, cfg: &SweepConfig) -> Result<Vec<OracleOutcome>> {
    let mut out = Vec::new();
    let want = |c: Check| check == Check::All || check == c;
    if want(Check::Lina) {
        out.push(lina_sweep(cfg.lina_families, cfg.lina_samples, seed)?);
    }
    if want(Check::Lemma30) {
        out.push(verify_lemma30(64, cfg.lemma30_trials, seed)?);
    }
    if want(Check::Kron) {
        let mut o = OracleOutcome::new("kron_antidiagonal");
        for n in 1..=12 {
            o.merge(verify_kron_antidiagonal(n, cfg.kron_trials, seed + n as u64)?);
        }
        out.push(o);
    }
    if want(Check::Dn) {
        let mut o = OracleOutcome::new("dn_quadform");
        for n in 5..=16 {
            o.merge(verify_dn_quadform(n, cfg.dn_trials, seed + n as u64)?);
        }
        out.push(o);
    }
    if want(Check::Atomic) {
        out.push(atomic_probe_sweep(cfg.atomic_trials, seed)?);
    }
    Ok(out)
}
