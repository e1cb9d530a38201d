//! Coherent state prefixes and their builders.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{capacity, domain, QrlError, Result};
use crate::limits::limits;
use crate::linalg::{partial_trace_last, ComplexMatrix, DensityMatrix, C64, ZERO};

pub const TOL_COHERENCE: f64 = 1e-10;

/// Largest depth accepted for implicit product states.
pub const MAX_IMPLICIT_DEPTH: usize = 1 << 24;

/// Closed-form densities on (0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityFn {
    F1,
    F2,
}

impl DensityFn {
    pub fn density(&self, x: f64) -> f64 {
        let l = 1.0 - x.ln();
        match self {
            DensityFn::F1 => 1.0 / (x * l * l),
            DensityFn::F2 => 2.0 / (x * l * l * l),
        }
    }

    /// Antiderivative with value 0 at 0⁺ and 1 at 1.
    pub fn antiderivative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let g = 1.0 / (1.0 - x.ln());
        match self {
            DensityFn::F1 => g,
            DensityFn::F2 => g * g,
        }
    }

    /// Point where the density is smallest; the density is monotone on each side.
    pub fn turning_point(&self) -> f64 {
        match self {
            DensityFn::F1 => (-1.0f64).exp(),
            DensityFn::F2 => (-2.0f64).exp(),
        }
    }
}

impl std::str::FromStr for DensityFn {
    type Err = QrlError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(DensityFn::F1),
            "f2" => Ok(DensityFn::F2),
            _ => Err(QrlError::Domain(format!("unknown density function `{s}`"))),
        }
    }
}

/// Generator record of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Generator {
    Tracial {},
    Classical {
        x: BitString,
    },
    Bernoulli {
        p: f64,
    },
    Chapter4 {},
    DiagonalF {
        f: DensityFn,
    },
    /// Levels supplied directly.
    Explicit {},
}

/// State descriptor as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDescriptor {
    #[serde(flatten)]
    pub generator: Generator,
    #[serde(rename = "N")]
    pub n: usize,
}

impl StateDescriptor {
    pub fn build(&self) -> Result<StatePrefix> {
        match &self.generator {
            Generator::Tracial {} => tracial_prefix(self.n),
            Generator::Classical { x } => classical_prefix(x, self.n),
            Generator::Bernoulli { p } => bernoulli_prefix(*p, self.n),
            Generator::Chapter4 {} => chapter4_prefix(self.n),
            Generator::DiagonalF { f } => diagonal_f_prefix(*f, self.n),
            Generator::Explicit {} => domain("explicit states cannot be built from a descriptor"),
        }
    }
}

/// Partial-trace chain of one tensor block: `chain[j]` is the block with j qubits traced out.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub n: usize,
    pub chain: Vec<DensityMatrix>,
}

impl Block {
    pub fn new(d: DensityMatrix) -> Result<Self> {
        let n = d.qubits();
        let mut chain = vec![d];
        for _ in 0..n {
            let next = partial_trace_last(chain.last().unwrap())?;
            chain.push(next);
        }
        Ok(Block { n, chain })
    }

    pub fn full(&self) -> &DensityMatrix {
        &self.chain[0]
    }
}

/// Block-product form ⊗ blocks; block `i` occupies qubits `offsets[i]+1 ..= offsets[i]+n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factored {
    pub blocks: Vec<Block>,
}

impl Factored {
    pub fn depth(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    /// Block containing qubit `k` (1-based) and the number of its qubits kept at level `k`.
    pub fn locate(&self, k: usize) -> Option<(usize, usize)> {
        let mut offset = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            if k <= offset + b.n {
                return Some((i, k - offset));
            }
            offset += b.n;
        }
        None
    }

    /// Number of qubits before block `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.blocks[..i].iter().map(|b| b.n).sum()
    }

    /// Level `k` as a sparse matrix: full blocks before, the partial trace of the current one.
    pub fn materialize(&self, k: usize) -> Result<DensityMatrix> {
        if k == 0 {
            return Ok(DensityMatrix::maximally_mixed(0));
        }
        let (i, kept) = self.locate(k).ok_or_else(|| QrlError::Domain(format!("level {k} beyond factored depth")))?;
        if k > usize::BITS as usize - 1 || (1usize << k) > limits().kron_max_dim {
            return capacity(format!("level {k} exceeds the materialization cap"));
        }
        let mut out = DensityMatrix::maximally_mixed(0);
        for b in &self.blocks[..i] {
            out = out.kron(b.full())?;
        }
        let b = &self.blocks[i];
        out.kron(&b.chain[b.n - kept])
    }
}

/// Coherent finite sequence ρ_1, …, ρ_N.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePrefix {
    descriptor: StateDescriptor,
    depth: usize,
    levels: Vec<DensityMatrix>,
    factored: Option<Factored>,
}

impl StatePrefix {
    /// Prefix from explicitly supplied levels ρ_1..ρ_N; coherence is not checked here.
    pub fn explicit(levels: Vec<DensityMatrix>) -> Result<Self> {
        for (i, l) in levels.iter().enumerate() {
            if l.qubits() != i + 1 {
                return domain(format!("level {} has {} qubits", i + 1, l.qubits()));
            }
        }
        Ok(StatePrefix {
            descriptor: StateDescriptor { generator: Generator::Explicit {}, n: levels.len() },
            depth: levels.len(),
            levels,
            factored: None,
        })
    }

    pub fn descriptor(&self) -> &StateDescriptor {
        &self.descriptor
    }

    /// Qubit count of the deepest level.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of levels stored explicitly.
    pub fn materialized_depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[DensityMatrix] {
        &self.levels
    }

    pub fn factored(&self) -> Option<&Factored> {
        self.factored.as_ref()
    }

    /// Level `n` (1-based).
    pub fn level(&self, n: usize) -> Result<&DensityMatrix> {
        if n == 0 || n > self.depth {
            return domain(format!("level {n} outside prefix depth {}", self.depth));
        }
        self.levels.get(n - 1).ok_or_else(|| {
            QrlError::Capacity(format!("level {n} is not materialized (stored up to {})", self.levels.len()))
        })
    }

    /// Single-qubit factor of qubit `q` (1-based) for product states.
    pub fn product_factor(&self, q: usize) -> Option<[[C64; 2]; 2]> {
        let r = |x: f64| C64::new(x, 0.0);
        match &self.descriptor.generator {
            Generator::Tracial {} => Some([[r(0.5), ZERO], [ZERO, r(0.5)]]),
            Generator::Bernoulli { p } => Some([[r(*p), ZERO], [ZERO, r(1.0 - p)]]),
            Generator::Classical { x } => {
                let b = x.bit(q - 1);
                Some([[r(if b { 0.0 } else { 1.0 }), ZERO], [ZERO, r(if b { 1.0 } else { 0.0 })]])
            }
            _ => None,
        }
    }

    /// Replaces level `n`; intended for negative controls.
    pub fn with_level_replaced(&self, n: usize, rho: DensityMatrix) -> Result<Self> {
        if n == 0 || n > self.levels.len() || rho.qubits() != n {
            return domain(format!("cannot replace level {n}"));
        }
        let mut out = self.clone();
        out.levels[n - 1] = rho;
        Ok(out)
    }
}

fn check_materializable(n: usize, what: &str) -> Result<()> {
    if n > limits().diagonal_max_qubits {
        return capacity(format!("{what}: {n} qubits exceeds diagonal cap {}", limits().diagonal_max_qubits));
    }
    Ok(())
}

fn diagonal_levels(weights_at: impl Fn(usize) -> Vec<f64>, n: usize) -> Result<Vec<DensityMatrix>> {
    (1..=n).map(|k| DensityMatrix::diagonal(&weights_at(k))).collect()
}

/// ρ_n = 2^{-n} I. Levels beyond the diagonal cap stay implicit.
pub fn tracial_prefix(n: usize) -> Result<StatePrefix> {
    if n == 0 || n > MAX_IMPLICIT_DEPTH {
        return capacity(format!("tracial depth {n} out of range 1..={MAX_IMPLICIT_DEPTH}"));
    }
    let m = n.min(limits().diagonal_max_qubits);
    let levels = (1..=m).map(DensityMatrix::maximally_mixed).collect();
    Ok(StatePrefix {
        descriptor: StateDescriptor { generator: Generator::Tracial {}, n },
        depth: n,
        levels,
        factored: None,
    })
}

/// ρ_n = |x↾n⟩⟨x↾n|.
pub fn classical_prefix(x: &BitString, n: usize) -> Result<StatePrefix> {
    if x.len() < n {
        return domain(format!("bitstring of length {} shorter than N={n}", x.len()));
    }
    if n == 0 || n > MAX_IMPLICIT_DEPTH {
        return capacity(format!("classical depth {n} out of range"));
    }
    let m = n.min(limits().diagonal_max_qubits);
    let levels = (1..=m).map(|k| DensityMatrix::basis_state(k, x.prefix(k).index())).collect::<Result<_>>()?;
    Ok(StatePrefix {
        descriptor: StateDescriptor { generator: Generator::Classical { x: x.prefix(n) }, n },
        depth: n,
        levels,
        factored: None,
    })
}

/// Diagonal weights of μ_n with μ(0)=p, μ(1)=1−p.
pub fn bernoulli_weights(p: f64, n: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..n {
        w = w.iter().flat_map(|&x| [x * p, x * (1.0 - p)]).collect();
    }
    w
}

/// μ_n = ⊗ diag(p, 1−p). Levels beyond the diagonal cap stay implicit.
pub fn bernoulli_prefix(p: f64, n: usize) -> Result<StatePrefix> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("Bernoulli parameter {p} outside (0,1)"));
    }
    if n == 0 || n > MAX_IMPLICIT_DEPTH {
        return capacity(format!("Bernoulli depth {n} out of range"));
    }
    let m = n.min(limits().diagonal_max_qubits);
    let levels = diagonal_levels(|k| bernoulli_weights(p, k), m)?;
    Ok(StatePrefix {
        descriptor: StateDescriptor { generator: Generator::Bernoulli { p }, n },
        depth: n,
        levels,
        factored: None,
    })
}

/// ⌊2^n / n⌋.
pub fn r_n(n: usize) -> usize {
    (1usize << n) / n
}

/// Σ_{n=5}^{N} n.
pub fn gamma(big_n: usize) -> usize {
    (5..=big_n).sum()
}

/// d_n: 2^{-n} on the diagonal and on the first and last r_n anti-diagonal positions.
pub fn chapter4_block(n: usize) -> Result<DensityMatrix> {
    if n < 3 {
        return domain(format!("chapter-4 block needs n ≥ 3, got {n}"));
    }
    if n > limits().factored_max_block.max(limits().diagonal_max_qubits) {
        return capacity(format!("block d_{n} exceeds cap"));
    }
    let d = 1usize << n;
    let r = r_n(n);
    let v = C64::new(1.0 / d as f64, 0.0);
    let mut trip = Vec::with_capacity(d + 2 * r);
    for i in 0..d {
        trip.push((i, i, v));
        if i < r || i >= d - r {
            trip.push((i, d - 1 - i, v));
        }
    }
    DensityMatrix::new(ComplexMatrix::from_triplets(d, d, trip)?)
}

/// ⊗_{n=5}^{N} d_n in factored form; levels materialized while the dimension is within the dense cap.
pub fn chapter4_prefix(big_n: usize) -> Result<StatePrefix> {
    if big_n < 5 || big_n > limits().factored_max_block {
        return capacity(format!("chapter-4 N={big_n} outside 5..={}", limits().factored_max_block));
    }
    let blocks = (5..=big_n).map(|n| chapter4_block(n).and_then(Block::new)).collect::<Result<Vec<_>>>()?;
    let factored = Factored { blocks };
    let depth = factored.depth();
    let cap = limits().dense_max_dim.trailing_zeros() as usize;
    let levels = (1..=depth.min(cap)).map(|k| factored.materialize(k)).collect::<Result<_>>()?;
    Ok(StatePrefix {
        descriptor: StateDescriptor { generator: Generator::Chapter4 {}, n: big_n },
        depth,
        levels,
        factored: Some(factored),
    })
}

/// α_σ = F(0.σ + 2^{-n}) − F(0.σ) for all σ of length n, from a shared grid at depth `top`.
fn f_weights(grid: &[f64], top: usize, n: usize) -> Vec<f64> {
    let step = 1usize << (top - n);
    (0..1usize << n).map(|i| grid[(i + 1) * step] - grid[i * step]).collect()
}

/// Diagonal state whose level-n weights integrate `f` over dyadic intervals.
pub fn diagonal_f_prefix(f: DensityFn, n: usize) -> Result<StatePrefix> {
    if n == 0 {
        return domain("diagonal_f needs N ≥ 1");
    }
    check_materializable(n, "diagonal_f")?;
    let scale = (1usize << n) as f64;
    let grid: Vec<f64> = (0..=1usize << n).map(|i| f.antiderivative(i as f64 / scale)).collect();
    let levels = diagonal_levels(|k| f_weights(&grid, n, k), n)?;
    Ok(StatePrefix {
        descriptor: StateDescriptor { generator: Generator::DiagonalF { f }, n },
        depth: n,
        levels,
        factored: None,
    })
}

/// Per-level coherence deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    /// (level n, ‖PT(ρ_n) − ρ_{n−1}‖_max), n ≥ 2.
    pub levels: Vec<(usize, f64)>,
    pub max_deviation: f64,
    pub failures: Vec<usize>,
    pub pass: bool,
}

/// Checks ‖PT(ρ_n) − ρ_{n−1}‖_max ≤ 1e-10 on every checkable level.
pub fn check_coherence(s: &StatePrefix) -> CoherenceReport {
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for n in 2..=s.levels.len() {
        let dev = partial_trace_last(&s.levels[n - 1])
            .and_then(|pt| pt.max_abs_diff(&s.levels[n - 2]))
            .unwrap_or(f64::INFINITY);
        rows.push((n, dev));
    }
    if let Some(f) = &s.factored {
        // beyond the stored levels, PT(S ⊗ L) − S ⊗ L' = S ⊗ (PT(L) − L'), whose max-norm factorizes
        let mut prefix_max = 1.0;
        for (i, b) in f.blocks.iter().enumerate() {
            let offset = f.offset(i);
            for kept in 1..=b.n {
                let k = offset + kept;
                if k <= s.levels.len().max(1) {
                    continue;
                }
                let dev = if kept == 1 {
                    let tr = b.chain[b.n - 1].matrix().trace();
                    prefix_max * ((tr - C64::new(1.0, 0.0)).norm())
                } else {
                    let dev = partial_trace_last(&b.chain[b.n - kept])
                        .and_then(|pt| pt.max_abs_diff(&b.chain[b.n - kept + 1]))
                        .unwrap_or(f64::INFINITY);
                    prefix_max * dev
                };
                rows.push((k, dev));
            }
            prefix_max *= b.full().matrix().max_abs();
        }
    }
    if s.product_factor(1).is_some() {
        for q in s.levels.len().max(1) + 1..=s.depth {
            let m = s.product_factor(q).unwrap();
            let tr = m[0][0] + m[1][1];
            rows.push((q, (tr - C64::new(1.0, 0.0)).norm()));
        }
    }
    let max_deviation = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let failures: Vec<usize> = rows.iter().filter(|r| !(r.1 <= TOL_COHERENCE)).map(|r| r.0).collect();
    CoherenceReport { pass: failures.is_empty(), levels: rows, max_deviation, failures }
}
