use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QrlError, Result};

/// Finite binary string; bit 0 is the first (most significant) qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn pushed(&self, b: bool) -> BitString {
        let mut out = self.clone();
        out.push(b);
        out
    }

    pub fn prefix(&self, n: usize) -> BitString {
        BitString(self.0[..n].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.len() <= other.len() && other.0[..self.len()] == self.0[..]
    }

    pub fn zeros(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Basis index with the first bit most significant.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn from_index(len: usize, index: usize) -> BitString {
        BitString((0..len).map(|i| (index >> (len - 1 - i)) & 1 == 1).collect())
    }

    /// All strings of length `len` in index order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        (0..1usize << len).map(move |i| BitString::from_index(len, i))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = QrlError;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(QrlError::Parse(format!("invalid bit `{c}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
