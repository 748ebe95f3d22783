//! Zeros of random holomorphic sections on complex tori.
//!
//! The library covers theta functions and the Green's function of a flat
//! torus ([`torus`]), spaces of sections and random ensembles ([`sections`],
//! [`ensemble`]), an argument-principle zero finder ([`zeros`]), grid
//! potentials and equilibrium measures ([`potential`], [`equilibrium`]),
//! closed-form joint densities of zeros with Monte Carlo checks ([`jpc`])
//! and a finite-`N` large deviation harness ([`harness`]). Polynomials on
//! the plane live in [`genus0`].
//!
//! The guide in `book/` walks through each part; its code runs as doctests.

pub mod checks;
pub mod config;
pub mod ensemble;
pub mod equilibrium;
pub mod error;
pub mod genus0;
pub mod grid;
pub mod harness;
pub mod jpc;
pub mod potential;
pub mod quad;
pub mod sections;
pub mod torus;
pub mod transport;
pub mod zeros;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

// The book chapters, compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/sections.md")]
    mod sections {}
    #[doc = include_str!("../../../book/src/zeros.md")]
    mod zeros {}
    #[doc = include_str!("../../../book/src/equilibrium.md")]
    mod equilibrium {}
    #[doc = include_str!("../../../book/src/jpc.md")]
    mod jpc {}
    #[doc = include_str!("../../../book/src/ldp.md")]
    mod ldp {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
