//! Simulation of a spin-1 color center with a large transverse zero-field
//! splitting under continuous microwave control.
//!
//! The crate covers the spin-1 operator algebra ([`spinops`]), exact
//! Ornstein–Uhlenbeck noise ([`noise`]), Hamiltonian builders for the lab and
//! rotating frames ([`hamiltonians`]), closed-form two-level effective models
//! ([`effective`]), time stepping ([`propagator`]), Monte Carlo averaging with
//! coherence-time extraction ([`ensemble`]) and canned protocols for dephasing
//! comparison and AC-field sensing ([`experiments`]).
//!
//! Units: angular frequencies in rad/μs, times in μs. A frequency quoted as
//! `f` MHz is stored as `2π·f`.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod effective;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod hamiltonians;
pub mod noise;
pub mod propagator;
pub mod spinops;

pub use error::{Error, ErrorKind, Result};

/// `2π`, the MHz → rad/μs conversion factor.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Converts a frequency in MHz to an angular frequency in rad/μs.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f
}
