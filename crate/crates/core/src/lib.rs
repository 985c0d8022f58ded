//! Simulation of the weak-value direct measurement of a superposition
//! wavefunction and of the Born-rule interference check built on it.
//!
//! Pipeline: a state on an `N`-point grid is coupled to a qubit pointer on a
//! set of marked cells ([`protocol::apply_coupling`]), post-selected on zero
//! momentum ([`protocol::postselect_p0`]), and the pointer expectation values
//! are turned into the weak value of the marked projector sum
//! ([`protocol::extract_weak_value`]). Marking `x1`, `x2` and both gives three
//! weak values proportional to `psi(x1)`, `psi(x2)` and `psi(x1) + psi(x2)`;
//! [`verify::born_residual`] measures how far they are from
//! `|a + b|^2 = |a|^2 + |b|^2 + 2 Re(a conj(b))`.
//!
//! [`sampling`] replaces exact expectations with photon counts and
//! [`imperfection`] adds instrument errors.

pub mod cli;
pub mod error;
pub mod imperfection;
pub mod protocol;
pub mod qstate;
pub mod sampling;
pub mod seeds;
pub mod verify;

pub use error::{Error, Result};
