//! Finite-truncation white-noise calculus for fermions.
//!
//! The crate builds truncated eigenbases of Dirac operators on tori, the wedge
//! algebra over them, integral kernel operators on the fermionic Fock space, and
//! implementers of gauge actions. The `analyzer` evaluates implementability
//! criteria as partial sums over growing cutoffs.

pub mod analyzer;
pub mod config;
pub mod error;
pub mod exterior;
pub mod fock;
pub mod implementer;
pub mod oneparticle;
pub mod qops;
pub mod suites;

pub use error::{FwnError, Result};
pub use num_complex::Complex64 as C64;

/// Shorthand for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
