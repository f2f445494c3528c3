//! Constructive compilation and certification for conditional restricted
//! Boltzmann machines (CRBMs).
//!
//! A CRBM with `k` input, `n` output and `m` hidden binary units defines
//! `p(y|x) ∝ Σ_z exp(zᵀVx + zᵀWy + bᵀy + cᵀz)`. The crate evaluates these
//! models exactly by enumeration, builds explicit parameters that realize
//! target conditional tables, and checks dimension and divergence bounds.
//!
//! States are little-endian bit-indexed integers. For a visible state the
//! input `x` occupies the low `k` bits and the output `y` the next `n` bits.

pub mod bitspace;
pub mod bounds;
pub mod cli;
pub mod compiler;
pub mod crbm;
pub mod dimension;
pub mod distributions;
pub mod error;
pub mod ltn;
pub mod mrf;
pub mod numeric;
pub mod packing;
pub mod sharing;
pub mod verify;

pub use error::{Error, Result};
