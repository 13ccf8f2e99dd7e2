//! Excitation energy transfer in chromophoric networks.
//!
//! A network of sites (chromophores) with a single excitation evolves under a
//! secular Lindblad master equation with an Ohmic phonon bath, a trapping
//! sink and a recombination sink. The crate builds the generator on
//! Liouville space, computes the energy transfer efficiency (ETE), and splits
//! it exactly into contributions of individual processes with two measures:
//! a resolvent (Green's function) measure and a susceptibility measure based
//! on forward sensitivities.
//!
//! Units are cm⁻¹, ps and K throughout; see [`quantities`].

pub mod bath;
pub mod contributions;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod liouville;
pub mod model;
pub mod quantities;

pub use error::{Error, Result};
