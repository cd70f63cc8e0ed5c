//! Quasienergy spectra and micromotion couplings for an atom held near a
//! single ion in a radio-frequency trap.
//!
//! All public numerics are dimensionless: lengths in units of the ion's
//! oscillator length l_i, energies in ħω₀ and time as τ = ω₀t. SI values only
//! appear in [`units::TrapConfig`].

pub mod adiabatic;
pub mod cache;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod numerov;
pub mod propagator;
pub mod single_ion;
pub mod spectra;
pub mod units;

pub use error::{Error, Result};
pub use floquet::{FloquetSpectrum, PeriodicHamiltonian};
pub use numerov::{BasisOptions, RadialGrid, UnperturbedBasis};
pub use units::{Scaled, TrapConfig};

pub use num_complex::Complex64 as C64;
