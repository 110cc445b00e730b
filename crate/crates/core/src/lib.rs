//! Simulation core for vertex-reinforced jump processes on dyadic lattices,
//! their random-environment representations, the convergent Bass-Burdzy
//! flow and the Linearly Reinforced Motion (LRM) built from it.
//!
//! The crate is `no_std` (it only needs `alloc`). Every routine is a pure
//! function of its parameters and an [`RngStream`], so replicas can be
//! generated in any order and on any number of threads.
//!
//! Module map:
//!
//! * [`rng`], [`sampling`], [`brownian`]: addressable randomness, the
//!   distributions of the mixing measures, driving Brownian paths.
//! * [`profile`]: initial occupation profiles and exact scale tables.
//! * [`lattice`]: exact event-driven VRJP / ERRW / environment walks, the
//!   mixture time change and the discrete martingale.
//! * [`environment`]: discrete, continuous and gamma environments.
//! * [`flow`]: the Bass-Burdzy flow against a piecewise-linear driver.
//! * [`lrm`]: scale and time changes that turn the flow into an LRM.
//! * [`envdiff`]: lattice approximation of the diffusion in random
//!   environment and its time changes.
//! * [`stats`]: KS machinery, the drifted-BM race oracle, small helpers.

#![no_std]

extern crate alloc;

pub mod brownian;
pub mod envdiff;
pub mod environment;
mod error;
pub mod flow;
pub mod lattice;
pub mod lrm;
pub mod profile;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
