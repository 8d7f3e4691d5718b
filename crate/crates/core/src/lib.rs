//! Floquet spectrum and dynamics of a strongly driven qubit coupled to a
//! harmonic oscillator beyond the rotating-wave approximation.
//!
//! The analytic layer ([`vanvleck`], [`dynamics`]) combines a polaron
//! transformation, drive dressing by Bessel functions and Van Vleck
//! perturbation theory in the tunneling element. The [`numeric`] layer
//! diagonalizes the truncated Floquet Hamiltonian and integrates the
//! Schrödinger equation directly, and serves as the reference.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod numeric;
pub mod par;
pub mod specialfns;
pub mod vanvleck;

pub use error::{Error, Result};
pub use model::{ResonanceIndex, Spin, SystemParams, Truncation};
pub use par::Execution;
