//! Lattice Yang-Mills with structure group SO(N) or SU(N): Langevin
//! dynamics, an independent Metropolis sampler, and statistical checks of
//! the curvature-based bounds that hold in the strong-coupling regime.

pub mod action;
pub mod config;
pub mod error;
pub mod gibbs;
pub mod group;
pub mod langevin;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod record;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
