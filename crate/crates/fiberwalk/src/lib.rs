//! Classical jump-process representation of lattice quantum dynamics.
//!
//! A particle diffusing on a periodic lattice is lifted to an extended state
//! space carrying a four-valued winding coordinate that counts action quanta.
//! The lifted process is an ordinary Markov jump process, yet its
//! `i^n`-weighted fiber sums reproduce the unitary propagator of the discrete
//! Schrodinger Hamiltonian after an exponential correction, and phase
//! averages of a two-particle version reproduce quantum density-matrix
//! evolution and projective conditioning.
//!
//! The crate provides the model definition ([`model`]), sparse operator
//! builders ([`operators`]), matrix exponentials and uniformization
//! ([`semigroup`]), the propagator reconstruction ([`equivalence`]),
//! continuous-time Monte Carlo estimators ([`montecarlo`]), density-matrix
//! machinery ([`density`]), and verification drivers ([`verify`]).
//!
//! Monte Carlo sampling runs data-parallel with rayon by default; build with
//! `--no-default-features` for the sequential fallback. Results are
//! bit-identical in both modes.

pub mod config;
pub mod converge;
pub mod density;
pub mod equivalence;
pub mod error;
pub mod io;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod operators;
pub mod semigroup;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};

/// Execution mode compiled into this build of the crate.
pub fn parallelism() -> &'static str {
    if cfg!(feature = "parallel") {
        "rayon"
    } else {
        "sequential"
    }
}

/// Tool version string stamped into output file headers.
pub fn tool_version() -> String {
    format!("fiberwalk v{}", env!("CARGO_PKG_VERSION"))
}
