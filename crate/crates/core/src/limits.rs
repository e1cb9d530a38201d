//! Capacity caps. Defaults can be overridden through `QRL_MAX_DIM`.
//!
//! `QRL_MAX_DIM` accepts either a bare integer (the dense dimension cap) or a
//! comma separated list of `key=value` pairs with keys `dense`, `kron`,
//! `factored` and `diagonal`.

use std::sync::OnceLock;

use crate::error::{QrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest dimension stored densely.
    pub dense_max_dim: usize,
    /// Largest dimension a Kronecker product may produce.
    pub kron_max_dim: usize,
    /// Largest block index for the factored chapter-4 state.
    pub factored_max_block: usize,
    /// Largest qubit count for implicit diagonal levels.
    pub diagonal_max_qubits: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { dense_max_dim: 1 << 11, kron_max_dim: 1 << 16, factored_max_block: 16, diagonal_max_qubits: 20 }
    }
}

impl Limits {
    pub fn parse(spec: &str) -> Result<Limits> {
        let mut out = Limits::default();
        let spec = spec.trim();
        if let Ok(v) = spec.parse::<usize>() {
            out.dense_max_dim = v;
            return Ok(out);
        }
        for part in spec.split(',') {
            let (k, v) =
                part.split_once('=').ok_or_else(|| QrlError::Parse(format!("bad QRL_MAX_DIM entry `{part}`")))?;
            let v: usize = v.trim().parse().map_err(|_| QrlError::Parse(format!("bad QRL_MAX_DIM value `{v}`")))?;
            match k.trim() {
                "dense" => out.dense_max_dim = v,
                "kron" => out.kron_max_dim = v,
                "factored" => out.factored_max_block = v,
                "diagonal" => out.diagonal_max_qubits = v,
                other => return Err(QrlError::Parse(format!("unknown QRL_MAX_DIM key `{other}`"))),
            }
        }
        Ok(out)
    }

    fn from_env() -> Limits {
        match std::env::var("QRL_MAX_DIM") {
            Ok(s) => Limits::parse(&s).unwrap_or_default(),
            Err(_) => Limits::default(),
        }
    }
}

/// Process-wide limits, read from the environment once.
pub fn limits() -> &'static Limits {
    static CELL: OnceLock<Limits> = OnceLock::new();
    CELL.get_or_init(Limits::from_env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(Limits::parse("4096").unwrap().dense_max_dim, 4096);
        let l = Limits::parse("kron=1024, factored=18").unwrap();
        assert_eq!(l.kron_max_dim, 1024);
        assert_eq!(l.factored_max_block, 18);
        assert!(Limits::parse("bogus=1").is_err());
    }
}
