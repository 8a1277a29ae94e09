//! Gap probabilities, counting statistics and Hamiltonian dynamics for the hard-edge
//! Pearcey point process.
//!
//! The kernel is evaluated through its integrable form, Fredholm determinants by Nyström
//! discretization, and the large-gap expansions in closed form so the two can be compared.

pub mod error;
pub mod specialfn;
pub mod quadrature;
pub mod ode;
pub mod kernel;
pub mod fredholm;
pub mod asymptotics;
pub mod dynamics;
pub mod verify;
pub mod cli;

pub use error::{Error, Result};
