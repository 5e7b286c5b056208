//! Tight-binding scattering theory for lattice billiards coupled to
//! semi-infinite leads.
//!
//! The crate builds the closed-billiard spectra in closed form, couples them
//! to lead channels, assembles the energy-dependent non-Hermitian effective
//! Hamiltonian and extracts S-matrix poles, transmission and reflection
//! amplitudes, and the interior scattering wavefunction. A separate
//! wave-matching solver ([`oracle`]) works directly on the lattice and is used
//! as an independent reference for everything the effective-Hamiltonian path
//! produces.
//!
//! Conventions used throughout:
//!
//! * All hoppings are `-1` inside the billiard and leads, `-v` across a
//!   billiard-lead bond, and the lead dispersion is `E = E_p - 2 cos k`.
//! * The self-energy enters as `H_eff = H_B - sum_p W_p W_p^T e^{i k_p}`, so
//!   open channels give `Im z <= 0` (decaying resonances).
//! * S-matrices are in the resolvent frame: `S = 1` for a decoupled
//!   billiard. [`analytic::wave_to_resolvent_frame`] converts the chain
//!   amplitudes of the incident-wave frame.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analytic;
pub mod coupling;
mod error;
pub mod geometry;
pub mod heff;
pub mod linalg;
pub mod oracle;
pub mod scattering;
pub mod spectra;
pub mod tracker;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use coupling::CouplingMatrix;
pub use geometry::{Geometry, OpenSystem};
pub use heff::{EffectiveHamiltonian, Mode, PoleSet};
pub use scattering::SMatrixResult;
