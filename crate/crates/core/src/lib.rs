#![no_std]
// index loops mirror the matrix notation of the numerics
#![allow(clippy::needless_range_loop)]

//! Simulation core for ion-intercalation memristors and the crossbar arrays
//! built from them.
//!
//! The crate is split along the physical layers of the problem:
//!
//! * [`device`] integrates intercalated charge under a programming field and
//!   maps it to conductance, flux and memristance.
//! * [`circuit`] is a small nodal-analysis engine: netlist stamping, sparse
//!   envelope Cholesky, Kirchhoff bookkeeping.
//! * [`crossbar`] describes the two array topologies (shared-rail two-terminal
//!   and isolated-loop four-terminal), turns a bias configuration into a nodal
//!   system and performs analog multiply-accumulate reads.
//! * [`write`] plans and executes write phases under the four scheduling
//!   policies and accounts disturbance of non-target cells.
//! * [`experiments`] holds the scripted measurement protocols and the
//!   resistance/charge fit, all emitting [`experiments::ExperimentTrace`]s.
//!
//! Everything here is pure and allocation-only; file formats and the command
//! line live in the `quadmem` companion crate.

extern crate alloc;

pub mod circuit;
pub mod crossbar;
pub mod device;
pub mod error;
pub mod experiments;
pub mod write;

pub use crate::error::{Error, Result};
