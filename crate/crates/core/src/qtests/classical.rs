use std::collections::{BTreeMap, BTreeSet};

use crate::bits::BitString;
use crate::error::{domain, Result};
use crate::states::StatePrefix;

/// Per-level sets of basis strings, stored as indices of strings of that length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassicalSigma {
    pub levels: BTreeMap<usize, BTreeSet<usize>>,
}

impl ClassicalSigma {
    pub fn from_strings(sets: Vec<(usize, Vec<BitString>)>) -> Result<Self> {
        let mut levels = BTreeMap::new();
        for (n, v) in sets {
            let mut s = BTreeSet::new();
            for b in v {
                if b.len() != n {
                    return domain(format!("string {b} does not have length {n}"));
                }
                s.insert(b.index());
            }
            levels.insert(n, s);
        }
        Ok(ClassicalSigma { levels })
    }

    pub fn strings(&self, n: usize) -> Vec<BitString> {
        self.levels.get(&n).map(|s| s.iter().map(|&i| BitString::from_index(n, i)).collect()).unwrap_or_default()
    }

    /// Lebesgue measure 2^{-n}|A_n| of the level-n cylinders.
    pub fn lebesgue(&self, n: usize) -> f64 {
        self.levels.get(&n).map(|s| s.len() as f64 / (1u64 << n) as f64).unwrap_or(0.0)
    }

    /// Lebesgue measure of the union over all levels.
    pub fn lebesgue_union(&self) -> f64 {
        match self.levels.keys().next_back() {
            Some(&top) => self.union_at(top).len() as f64 / (1u64 << top) as f64,
            None => 0.0,
        }
    }

    /// Strings of length `top` lying in the union of the cylinders of levels ≤ `top`.
    pub fn union_at(&self, top: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (&n, s) in self.levels.range(..=top) {
            let shift = top - n;
            for &i in s {
                for t in 0..1usize << shift {
                    out.insert((i << shift) | t);
                }
            }
        }
        out
    }

    /// μ_ρ of the level-n cylinders: Σ_{σ∈A_n} ⟨σ|ρ_n|σ⟩.
    pub fn mass_under(&self, state: &StatePrefix, n: usize) -> Result<f64> {
        let w = state.level(n)?.diagonal_weights();
        Ok(self.levels.get(&n).map(|s| s.iter().map(|&i| w[i]).sum()).unwrap_or(0.0))
    }

    /// μ_ρ of the union of all cylinders, evaluated at the deepest level.
    pub fn union_mass_under(&self, state: &StatePrefix) -> Result<f64> {
        let top = match self.levels.keys().next_back() {
            Some(&t) => t,
            None => return Ok(0.0),
        };
        let w = state.level(top)?.diagonal_weights();
        Ok(self.union_at(top).iter().map(|&i| w[i]).sum())
    }

    /// Checks every string at a level has all its extensions at the next present level.
    pub fn check_upward_closed(&self) -> Result<()> {
        let keys: Vec<usize> = self.levels.keys().copied().collect();
        for w in keys.windows(2) {
            let (a, b) = (w[0], w[1]);
            let upper = &self.levels[&b];
            for &i in &self.levels[&a] {
                for t in 0..1usize << (b - a) {
                    if !upper.contains(&((i << (b - a)) | t)) {
                        return domain(format!(
                            "cylinder nesting fails: {} at level {a} not covered at level {b}",
                            BitString::from_index(a, i)
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Classical test: member `j` has index `first_index + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMlt {
    pub first_index: usize,
    pub members: Vec<ClassicalSigma>,
}

impl ClassicalMlt {
    /// Checks |A^m_i| ≤ 2^{i−m} and cylinder nesting.
    pub fn validate(&self) -> Result<()> {
        for (j, s) in self.members.iter().enumerate() {
            let m = self.first_index + j;
            for (&i, set) in &s.levels {
                let cap = if i >= m { 1u128 << (i - m) } else { 0 };
                if set.len() as u128 > cap && i >= m {
                    return domain(format!("member {m}: level {i} has {} strings, more than 2^{}", set.len(), i - m));
                }
                if i < m && !set.is_empty() {
                    return domain(format!("member {m}: level {i} has {} strings, more than 2^({i}-{m})", set.len()));
                }
            }
            s.check_upward_closed().map_err(|e| crate::error::QrlError::Domain(format!("member {m}: {e}")))?;
        }
        Ok(())
    }
}
