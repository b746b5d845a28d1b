//! Simulation and verification laboratory for N-particle branching random
//! walks with trimming (removal from the most populated site) and their
//! mean-field limits.
//!
//! The crate cross-validates three descriptions of the same dynamics:
//!
//! * the exact particle system, simulated event by event ([`particle`]);
//! * the grid ODE for the density/removal pair, integrated by two
//!   independent schemes ([`meanfield`]);
//! * closed-form stationary solutions of the limiting free obstacle
//!   problem, checked through their weak formulation ([`stationary`]).
//!
//! [`operators`] carries the discrete generators and their identities,
//! [`coupling`] the shared-noise two-walker contraction diagnostics, and
//! [`harness`] the metrics and convergence experiments tying it together.
//!
//! Data-parallel regions (replica fan-out, per-site sweeps) run on rayon
//! under the default `parallel` feature and on plain iterators without it.

pub mod coupling;
pub mod drift;
pub mod error;
pub mod exec;
pub mod grid;
pub mod gridfn;
pub mod harness;
pub mod io;
pub mod meanfield;
pub mod operators;
pub mod particle;
pub mod plot;
pub mod quad;
pub mod stationary;

pub use error::{Error, Result};
