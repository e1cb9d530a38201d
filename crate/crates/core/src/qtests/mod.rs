//! Special projections, q-Σ⁰₁ sets and the test families built from them.

mod builders;
mod classical;
mod projection;
mod sets;

pub use builders::*;
pub use classical::{ClassicalMlt, ClassicalSigma};
pub use projection::{
    factored_trace, level_trace, nesting_deviation, ProjectionRepr, SpecialProjection, TOL_IDEMPOTENT,
};
pub use sets::{evaluate, evaluate_levels, MassMeasure, Members, QSigmaSet, QTest, TestKind, TOL_MASS};
