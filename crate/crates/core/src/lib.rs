//! Stability analysis of predictors under shifts in unstable causal mechanisms.
//!
//! Graphs mark some edges as unstable across environments. The crate decides
//! which conditional, interventional and counterfactual distributions of the
//! target are invariant to those edges, builds linear predictors from them,
//! and measures how they trade accuracy for robustness in linear Gaussian models.

pub mod corpus;
pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod robust;
pub mod scm;

pub use error::{Error, Result};

/// Seed for the `k`-th independent use of a user seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
