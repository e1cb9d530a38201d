use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::projection::{check_nesting, level_trace, SpecialProjection};
use crate::binom::weighted_binomial_sum;
use crate::error::{domain, invariant, Result};
use crate::states::StatePrefix;

pub const TOL_MASS: f64 = 1e-9;
const TOL_MONOTONE: f64 = 1e-8;

/// Finite truncation of a q-Σ⁰₁ set: one special projection per present level.
#[derive(Debug, Clone, PartialEq)]
pub struct QSigmaSet {
    levels: BTreeMap<usize, SpecialProjection>,
}

impl QSigmaSet {
    /// Checks range nesting between consecutive present levels.
    pub fn new(levels: Vec<SpecialProjection>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in levels {
            if map.insert(p.qubits(), p).is_some() {
                return domain("two projections on the same level");
            }
        }
        let v: Vec<&SpecialProjection> = map.values().collect();
        for w in v.windows(2) {
            check_nesting(w[0], w[1])?;
        }
        Ok(QSigmaSet { levels: map })
    }

    pub fn single(p: SpecialProjection) -> Self {
        let mut levels = BTreeMap::new();
        levels.insert(p.qubits(), p);
        QSigmaSet { levels }
    }

    pub fn levels(&self) -> &BTreeMap<usize, SpecialProjection> {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Option<&SpecialProjection> {
        self.levels.get(&n)
    }

    /// τ of the set: the largest level τ (levels are nested, so this is the last one).
    pub fn tau(&self) -> f64 {
        self.levels.values().map(SpecialProjection::tau).fold(0.0, f64::max)
    }
}

/// Tr(ρ_n p_n) over the levels shared with the state, as (level, trace) rows.
pub fn evaluate_levels(state: &StatePrefix, g: &QSigmaSet) -> Result<Vec<(usize, f64)>> {
    let rows: Vec<(usize, f64)> = g
        .levels
        .iter()
        .filter(|(n, _)| **n <= state.depth())
        .map(|(n, p)| level_trace(state, p).map(|t| (*n, t)))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return domain("no level of the set lies within the state prefix");
    }
    for w in rows.windows(2) {
        if w[1].1 < w[0].1 - TOL_MONOTONE {
            return invariant(format!("trace decreases from level {} to level {}", w[0].0, w[1].0));
        }
    }
    Ok(rows)
}

/// ρ(G) restricted to the prefix: the largest Tr(ρ_n p_n) over shared levels.
pub fn evaluate(state: &StatePrefix, g: &QSigmaSet) -> Result<f64> {
    Ok(evaluate_levels(state, g)?.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Mlt,
    Solovay,
    StrongSolovay,
    Schnorr,
}

/// Measure used for member masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMeasure {
    /// τ, the normalized rank.
    Tracial,
    /// Tr(μ_n S) for the Bernoulli state μ with μ(0) = p.
    Bernoulli(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Members {
    Sets(Vec<QSigmaSet>),
    Projections(Vec<SpecialProjection>),
}

impl Members {
    pub fn len(&self) -> usize {
        match self {
            Members::Sets(v) => v.len(),
            Members::Projections(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Leveled test family; member `j` carries index `first_index + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTest {
    kind: TestKind,
    first_index: usize,
    members: Members,
    declared_mass: Option<f64>,
    measure: MassMeasure,
}

fn projection_mass(p: &SpecialProjection, measure: MassMeasure) -> Result<f64> {
    match measure {
        MassMeasure::Tracial => Ok(p.tau()),
        MassMeasure::Bernoulli(q) => {
            if !p.is_diagonal() {
                return domain("Bernoulli mass needs a diagonal projection");
            }
            if let super::projection::ProjectionRepr::Counting { count_zeros, member } = p.repr() {
                let (a, b) = if *count_zeros { (q, 1.0 - q) } else { (1.0 - q, q) };
                return Ok(weighted_binomial_sum(p.qubits(), a, b, |k| member[k]));
            }
            let n = p.qubits();
            Ok((0..1usize << n)
                .map(|i| {
                    let ones = i.count_ones() as i32;
                    p.diagonal_entry(i) * q.powi(n as i32 - ones) * (1.0 - q).powi(ones)
                })
                .sum())
        }
    }
}

impl QTest {
    /// Builds a test after checking the invariant of its kind.
    pub fn new(
        kind: TestKind,
        first_index: usize,
        members: Members,
        declared_mass: Option<f64>,
        measure: MassMeasure,
    ) -> Result<Self> {
        let t = QTest { kind, first_index, members, declared_mass, measure };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        match (self.kind, &self.members) {
            (TestKind::Mlt | TestKind::Solovay, Members::Sets(_)) => {}
            (TestKind::StrongSolovay | TestKind::Schnorr, Members::Projections(_)) => {}
            _ => return domain(format!("{:?} tests need the other member shape", self.kind)),
        }
        let masses = self.member_masses()?;
        match self.kind {
            TestKind::Mlt => {
                for (j, m) in masses.iter().enumerate() {
                    let idx = self.first_index + j;
                    let bound = 2f64.powi(-(idx as i32));
                    if *m > bound + TOL_MASS {
                        return invariant(format!("member {idx} has τ = {m} > 2^-{idx}"));
                    }
                }
            }
            TestKind::Solovay | TestKind::StrongSolovay | TestKind::Schnorr => {
                if self.kind == TestKind::Schnorr && !self.declared_mass.is_some_and(f64::is_finite) {
                    return invariant("Schnorr test needs a finite declared mass");
                }
                if let Some(d) = self.declared_mass {
                    let total: f64 = masses.iter().sum();
                    if total > d + TOL_MASS {
                        return invariant(format!("member mass {total} exceeds declared {d}"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }

    pub fn members(&self) -> &Members {
        &self.members
    }

    pub fn declared_mass(&self) -> Option<f64> {
        self.declared_mass
    }

    pub fn measure(&self) -> MassMeasure {
        self.measure
    }

    /// Mass of each member under the test's measure.
    pub fn member_masses(&self) -> Result<Vec<f64>> {
        match &self.members {
            Members::Sets(v) => v
                .iter()
                .map(|s| match self.measure {
                    MassMeasure::Tracial => Ok(s.tau()),
                    m => s.levels.values().map(|p| projection_mass(p, m)).try_fold(0.0f64, |a, x| Ok(a.max(x?))),
                })
                .collect(),
            Members::Projections(v) => v.iter().map(|p| projection_mass(p, self.measure)).collect(),
        }
    }
}
