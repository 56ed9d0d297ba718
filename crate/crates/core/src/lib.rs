//! Numerical core of the 1-equivariant harmonic map flow laboratory.
//!
//! Everything here is allocation-backed but free of I/O so it builds on
//! `no_std + alloc` targets. File formats and the command line live in the
//! companion `hmf-lab` crate.

#![no_std]
// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod math;

pub mod ansatz;

pub mod constraints;
pub mod corrector;
pub mod error;
pub mod heat4d;
pub mod interp;
pub mod jet;
pub mod kernels;
pub mod mu_dynamics;
pub mod quad;
pub mod rates;
pub mod special;
pub mod pde;
pub mod stencil;

pub use error::{Error, Result};
pub use math::KahanSum;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
