//! Simulation and analysis of a cavity-mediated adiabatic-passage SWAP gate
//! (and its CNOT extension) on two five-level atoms in a single-mode cavity.
//!
//! Module map:
//! - [`hilbert`]: truncated product basis and its conserved-charge blocks
//! - [`pulses`]: Gaussian envelopes and the swap8 / swap7 / cnot11 schedules
//! - [`hamiltonian`]: time-dependent RWA Hamiltonian with optional losses
//! - [`propagator`]: Schrodinger integration and realized gate matrices
//! - [`darkstates`]: analytic dark states, spectra, adiabatic tracking
//! - [`gateanalysis`]: fidelity, exposure, scans, physical estimates
//! - [`cli`]: config files and the command implementations behind the binary

pub mod cli;
pub mod darkstates;
pub mod error;
pub mod gateanalysis;
pub mod hamiltonian;
pub mod hilbert;
pub mod propagator;
pub mod pulses;

pub use error::{Error, Result};
pub use hilbert::{AtomLevel, Basis, BasisState, StateVector};
pub use pulses::{build_schedule, Protocol, Schedule, ScheduleParams};
