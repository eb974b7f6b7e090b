//! Coupled generator decomposition.
//!
//! Data blocks `X⁽ᵐ'ᵇ⁾` (channels × shared axis) are factorized as
//! `X ≈ X̃ G S⁽ᵐ'ᵇ⁾` with one generator `G` shared by every block and a
//! mixing matrix per block. Sparse PCA constrains `S` to orthonormal rows and
//! puts elastic-net penalties on `G`; archetypal analysis makes both
//! column-stochastic.

pub mod cli;
pub mod data;
pub mod decomp;
pub mod error;
pub mod export;
pub mod linalg;
pub mod optim;
pub mod par;
pub mod selection;
pub mod spca;

pub use error::{Error, Result};
