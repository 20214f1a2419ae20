//! Simulation library for ultrafast laser-pulse experiments on a single
//! trapped ¹¹¹Cd⁺ ion.
//!
//! The physical system is the microwave clock qubit spanned by the
//! |F=0, m=0⟩ and |F=1, m=0⟩ hyperfine ground states of 5s ²S₁/₂, driven
//! through the 5p ²P₃/₂ manifold by π-polarized picosecond pulses whose
//! bandwidth dwarfs both hyperfine splittings.  The crate models
//!
//! * the hyperfine level structure, π-transition couplings, and
//!   spontaneous-emission branching ([`atomic`]),
//! * pulse unitaries, microwave rotations, and analytic free evolution with
//!   decay ([`dynamics`]), plus a finite-pulse-width master-equation
//!   cross-check ([`master`]),
//! * thermal-motion averaging of optical phases ([`motion`]),
//! * photon-count detection and bright-fraction estimation ([`detection`]),
//! * the experiment sequences themselves ([`experiments`]), and
//! * fitting/unwrapping utilities used to turn scans into frequencies
//!   ([`analysis`]).
//!
//! Times are picoseconds, frequencies GHz, pulse energies pJ, and angles
//! radians unless a name says otherwise.

pub mod analysis;
pub mod angular;
pub mod atomic;
pub mod density;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod master;
pub mod motion;
pub mod ode;
mod optimize;
pub mod seeding;

pub use error::{Error, Result};
