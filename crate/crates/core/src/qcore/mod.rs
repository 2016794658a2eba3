//! Truncated Fock-space linear algebra.
//!
//! Every mode is cut off at a finite number of levels. Multi-mode spaces are
//! ordered with mode 0 as the slowest-varying index, so for a space
//! `[d0, d1, d2]` the basis state `|n0, n1, n2⟩` sits at index
//! `(n0 * d1 + n1) * d2 + n2`. The oracle relies on this: the optical mode is
//! always slot 0, which makes every photon-number sector a contiguous block.

mod expm;
mod guard;
mod operator;
mod state;

pub use expm::matrix_exp;
pub use guard::{guarded_indices, guarded_subspace, DEFAULT_GUARD_LEVELS};
pub use operator::{
    annihilation, creation, embed, identity, number_operator, OperatorMatrix,
};
pub use state::{
    coherent_state, coherent_state_with, coherent_tail_mass, displacement_operator,
    displacement_operator_with, expectation, squeeze_operator, squeezed_vacuum,
    squeezed_vacuum_with, StateVector,
};

use crate::error::{Error, Result};

/// Truncation dimension of one mode: levels `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dim(usize);

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Dim(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Dim::new(n)
    }
}

impl std::fmt::Display for Dim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Product dimension of a multi-mode space.
pub fn product_dim(space: &[Dim]) -> usize {
    space.iter().map(|d| d.get()).product()
}

pub(crate) fn describe_space(space: &[Dim]) -> String {
    let parts: Vec<String> = space.iter().map(|d| d.to_string()).collect();
    format!("[{}]", parts.join("x"))
}

/// Numerical tolerances shared by the truncated-space routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Max-entry bound on `U†U − I` over the guarded subspace.
    pub unitarity: f64,
    pub normalization: f64,
    /// Probability mass allowed above level `dim − 3` of the exact state.
    pub tail: f64,
    pub expm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unitarity: 1e-8,
            normalization: 1e-12,
            tail: 1e-8,
            expm: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("unitarity", self.unitarity),
            ("normalization", self.normalization),
            ("tail", self.tail),
            ("expm", self.expm),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::invalid(
                    "tolerances",
                    format!("{name} must lie in (0, 1), got {value}"),
                ));
            }
        }
        Ok(())
    }
}
