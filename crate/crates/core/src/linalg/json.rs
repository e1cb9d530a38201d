use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, Storage, C64};
use crate::error::{QrlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entries {
    Sparse(Vec<(usize, usize, f64, f64)>),
    Dense(Vec<(f64, f64)>),
}

/// On-disk form of a square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub storage: StorageKind,
    pub entries: Entries,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(QrlError::Domain("only square matrices are serialized".into()));
        }
        Ok(match m.storage() {
            Storage::Dense(d) => MatrixJson {
                dim: m.rows(),
                storage: StorageKind::Dense,
                entries: Entries::Dense(d.iter().map(|x| (x.re, x.im)).collect()),
            },
            Storage::Sparse { .. } => MatrixJson {
                dim: m.rows(),
                storage: StorageKind::Sparse,
                entries: Entries::Sparse(m.entries().map(|(i, j, v)| (i, j, v.re, v.im)).collect()),
            },
        })
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.dim;
        match (&self.storage, &self.entries) {
            (StorageKind::Dense, Entries::Dense(e)) => {
                ComplexMatrix::dense(n, n, e.iter().map(|&(re, im)| C64::new(re, im)).collect())
            }
            (StorageKind::Sparse, Entries::Sparse(e)) => {
                ComplexMatrix::from_triplets(n, n, e.iter().map(|&(i, j, re, im)| (i, j, C64::new(re, im))).collect())
            }
            (StorageKind::Sparse, Entries::Dense(e)) if e.is_empty() => Ok(ComplexMatrix::zeros_sparse(n, n)),
            (StorageKind::Dense, Entries::Sparse(e)) if e.is_empty() && n == 0 => ComplexMatrix::dense(0, 0, vec![]),
            _ => Err(QrlError::Parse("matrix entries do not match the declared storage".into())),
        }
    }
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Result<String> {
    let j = MatrixJson::from_matrix(m)?;
    serde_json::to_string(&j).map_err(|e| QrlError::Parse(e.to_string()))
}

pub fn matrix_from_json(s: &str) -> Result<ComplexMatrix> {
    let j: MatrixJson = serde_json::from_str(s).map_err(|e| QrlError::Parse(e.to_string()))?;
    j.to_matrix()
}
