//! Dimension reduction of sparse designs by min-wise hashing, followed by
//! linear or logistic regression on the compressed matrix.
//!
//! The crate also carries the theoretical machinery around the method:
//! oracle coefficient vectors on the compressed scale, closed-form bounds,
//! and a Monte Carlo harness that checks those bounds empirically.

pub mod error;
pub mod hashing;
pub mod io;
pub mod oracle;
pub mod regress;
pub mod rng;
pub mod simulate;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use hashing::{build_ensemble, HashConfig, HashEnsemble, HashOutput, PermutationMode, Variant};
pub use sparse::{sparsity_profile, SparseMatrix, SparsityProfile};
