//! Electron wavepacket interference with a monitored phonon register.
//!
//! The electron lives on a uniform 1-D grid and is coupled to a single
//! truncated phonon mode. Projective phonon-number measurements during the
//! evolution split the ensemble into trajectories that did and did not
//! create a phonon, and the screen statistics of the two classes are compared.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collapse;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hilbert;
pub mod mzi;
pub mod observables;
pub mod rng;

pub use error::{Error, Result};
