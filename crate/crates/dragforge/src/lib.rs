//! Surrogate-assisted drag minimization for spline-parameterized 2D shapes:
//! a lattice-Boltzmann drag solver, a six-hidden-layer ReLU regression
//! surrogate, and self-correcting active-learning loops that search the
//! shape box for a verified drag minimum, optionally under a user-supplied
//! containment constraint.

pub mod active;
pub mod config;
pub mod constraints;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod surrogate;

pub use error::{Error, Result};
