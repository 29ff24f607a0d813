//! Differential iterations `a -> a + delta * F(a)` of polynomial vector
//! fields, with fixed-point analysis, saddle-point (Plancherel-Rotach)
//! structure, Hermite asymptotics, and Ulam transfer-operator oracles for
//! the invariant density.

pub mod error;
pub mod polymap;
pub mod system;

pub use error::{Error, Result};
pub use polymap::{Monomial, PartialLinearDecomposition, Poly, PolyMap};
pub mod difiter;
pub mod models;
pub mod region;
pub mod equilibria;
pub mod hermite;
pub mod saddle;
pub mod ulam;
pub mod lorenzlab;

#[cfg(test)]
mod invariants;
