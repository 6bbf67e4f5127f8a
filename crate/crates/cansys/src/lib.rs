//! Direct and inverse spectral problems for canonical systems
//! w′ = iλJH(x)w whose Hamiltonians H = β*β come from matrix string
//! equations.
//!
//! The direct side integrates the system and maps the monodromy to Weyl
//! functions; the inverse side turns Herglotz data (ν, τ) into an S-node and
//! recovers H from nested Cholesky factors. [`pipeline`] chains both into a
//! round trip.

pub mod direct;
pub mod discretize;
pub mod herglotz;
pub mod inverse;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod weyl;

pub use linalg::{ComplexMatrix, C64};
