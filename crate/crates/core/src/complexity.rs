//! Finite prefix-free machines and machine-relative QK complexity.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{domain, QrlError, Result};
use crate::linalg::{inner, projector_from, top_eigvec_in_complement, DensityMatrix, C64};

pub const TOL_KRAFT: f64 = 1e-12;
pub const TOL_ORTHO: f64 = 1e-9;

/// One table entry σ ↦ F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub sigma: BitString,
    pub dim_qubits: usize,
    pub vectors: Vec<Vec<C64>>,
}

impl Program {
    /// |σ| + log₂|F|.
    pub fn cost(&self) -> f64 {
        self.sigma.len() as f64 + (self.vectors.len() as f64).log2()
    }

    /// Σ_{v∈F} ⟨v|τ|v⟩.
    pub fn mass(&self, tau: &DensityMatrix) -> Result<f64> {
        let mut s = 0.0;
        for v in &self.vectors {
            s += tau.matrix().quad_form(v)?.re;
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixFreeMachine {
    pub programs: Vec<Program>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub prefix_free: bool,
    /// Pairs (σ, σ′) with σ a prefix of σ′.
    pub prefix_violations: Vec<(String, String)>,
    pub kraft_sum: f64,
    pub kraft_ok: bool,
    /// Programs whose output fails orthonormality, with the worst deviation.
    pub orthonormal_failures: Vec<(String, f64)>,
    /// Programs whose vectors do not have length 2^dim_qubits.
    pub dimension_failures: Vec<String>,
    pub declared_measure_ok: Option<bool>,
    pub valid: bool,
}

fn ortho_deviation(vs: &[Vec<C64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, v) in vs.iter().enumerate() {
        for (j, w) in vs.iter().enumerate().skip(i) {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner(v, w) - want).norm());
        }
    }
    worst
}

impl PrefixFreeMachine {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| QrlError::Parse(format!("machine JSON: {e}")))
    }

    pub fn kraft_sum(&self) -> f64 {
        self.programs.iter().map(|p| 2f64.powi(-(p.sigma.len() as i32))).sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut sig: Vec<&BitString> = self.programs.iter().map(|p| &p.sigma).collect();
        sig.sort_by(|a, b| a.0.cmp(&b.0));
        let mut prefix_violations = Vec::new();
        for (i, a) in sig.iter().enumerate() {
            for b in &sig[i + 1..] {
                if a.is_prefix_of(b) {
                    prefix_violations.push((a.to_string(), b.to_string()));
                }
            }
        }
        let kraft_sum = self.kraft_sum();
        let kraft_ok = kraft_sum <= 1.0 + TOL_KRAFT;
        let mut orthonormal_failures = Vec::new();
        let mut dimension_failures = Vec::new();
        for p in &self.programs {
            if p.dim_qubits >= usize::BITS as usize || p.vectors.iter().any(|v| v.len() != 1usize << p.dim_qubits) {
                dimension_failures.push(p.sigma.to_string());
                continue;
            }
            let d = ortho_deviation(&p.vectors);
            if d > TOL_ORTHO {
                orthonormal_failures.push((p.sigma.to_string(), d));
            }
        }
        let declared_measure_ok = self.declared_measure.map(|m| (kraft_sum - m).abs() <= TOL_KRAFT);
        let valid = prefix_violations.is_empty()
            && kraft_ok
            && orthonormal_failures.is_empty()
            && dimension_failures.is_empty()
            && declared_measure_ok != Some(false);
        ValidationReport {
            prefix_free: prefix_violations.is_empty(),
            prefix_violations,
            kraft_sum,
            kraft_ok,
            orthonormal_failures,
            dimension_failures,
            declared_measure_ok,
            valid,
        }
    }

    fn ensure_valid(&self) -> Result<()> {
        let r = self.validate();
        if !r.valid {
            return domain(format!(
                "invalid machine (prefix-free {}, Kraft sum {}, {} non-orthonormal outputs, {} bad dimensions, declared measure ok {:?})",
                r.prefix_free,
                r.kraft_sum,
                r.orthonormal_failures.len(),
                r.dimension_failures.len(),
                r.declared_measure_ok
            ));
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return domain(format!("ε = {eps} outside (0,1]"));
    }
    Ok(())
}

/// min |σ| + log₂|F| over entries on |τ| qubits with Σ_{v∈F} ⟨v|τ|v⟩ > ε; ∞ if none.
fn scan(m: &PrefixFreeMachine, tau: &DensityMatrix, eps: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for p in m.programs.iter().filter(|p| p.dim_qubits == tau.qubits() && !p.vectors.is_empty()) {
        if p.mass(tau)? > eps {
            best = best.min(p.cost());
        }
    }
    Ok(best)
}

/// Machine-relative QK^ε(τ).
pub fn qk_eps(m: &PrefixFreeMachine, tau: &DensityMatrix, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    m.ensure_valid()?;
    scan(m, tau, eps)
}

/// QK_C^ε(τ); the machine must declare its domain measure.
pub fn qk_c(m: &PrefixFreeMachine, tau: &DensityMatrix, eps: f64) -> Result<f64> {
    if m.declared_measure.is_none() {
        return domain("QK_C needs a machine with a declared domain measure");
    }
    qk_eps(m, tau, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub found: usize,
    /// ε^{-1} 2^B.
    pub bound: f64,
    pub pass: bool,
    #[serde(skip)]
    pub vectors: Vec<Vec<C64>>,
}

/// Greedy maximal orthonormal V ⊂ ℂ^{2^s} with QK^ε(|v⟩⟨v|) ≤ B, checked against N ≤ ε^{-1}2^B.
pub fn counting_check(m: &PrefixFreeMachine, s: usize, big_b: f64, eps: f64) -> Result<CountingReport> {
    check_eps(eps)?;
    m.ensure_valid()?;
    let dim = 1usize << s;
    let mut cands: Vec<&Program> =
        m.programs.iter().filter(|p| p.dim_qubits == s && !p.vectors.is_empty() && p.cost() <= big_b).collect();
    cands.sort_by(|a, b| a.sigma.0.cmp(&b.sigma.0));
    let projs = cands.iter().map(|p| projector_from(dim, &p.vectors)).collect::<Result<Vec<_>>>()?;
    let mut found: Vec<Vec<C64>> = Vec::new();
    loop {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for p in &projs {
            let e = top_eigvec_in_complement(p, &found)?;
            if e.exhausted {
                break;
            }
            if best.as_ref().is_none_or(|b| e.value > b.0) {
                best = Some((e.value, e.vector));
            }
        }
        let Some((val, v)) = best else { break };
        if !(val > eps + 1e-12) {
            break;
        }
        let rho = DensityMatrix::pure(&v)?;
        if scan(m, &rho, eps)? > big_b {
            break;
        }
        found.push(v);
    }
    let bound = 2f64.powf(big_b) / eps;
    Ok(CountingReport { found: found.len(), bound, pass: found.len() as f64 <= bound, vectors: found })
}
