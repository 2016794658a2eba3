//! Quantum model of a monochromatic gravitational wave coupled to a single
//! cavity mode through the photon number.
//!
//! The crate has two independent routes to every observable:
//!
//! * [`analytic`] evaluates the closed-form quadrature means and variances
//!   for vacuum, coherent, squeezed and thermal gravitational states.
//! * [`oracle`] builds the joint optical/gravitational Hamiltonian on a
//!   truncated Fock space, exponentiates it numerically and reads the same
//!   observables off the propagated state.
//!
//! [`params`] converts laboratory quantities (strain, frequency, temperature,
//! Hubble rate) into model couplings, [`qcore`] holds the truncated-space
//! linear algebra, and [`cli`] packages named scenarios and the acceptance
//! suite behind the `gravicav` binary.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod params;
pub mod qcore;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
