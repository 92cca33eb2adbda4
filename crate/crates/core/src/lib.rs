//! Joint AP beamforming and RIS phase-shift optimization for max-min fairness
//! in RIS-assisted cell-free massive MIMO downlinks.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] draws seeded channel realizations for a 3D deployment.
//! * [`model`] holds the deterministic channel algebra, SINR/rate evaluation,
//!   MRT/ZF beamformers and the matrix assemblies consumed by the solvers.
//! * [`conic`] is a dense primal-dual interior-point solver for SDPs and SOCPs,
//!   plus Gaussian randomization for rank-one recovery.
//! * [`ilp`] is a bounded simplex with SOS1 branch-and-bound for the binary
//!   program that optimizes discrete phases exactly.
//! * [`algorithms`] implements the six optimization algorithms and the two
//!   benchmark schemes.
//! * [`experiment`] is the configuration-driven Monte Carlo harness behind the
//!   `cellfree-ris` binary.

pub mod algorithms;
pub mod conic;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ilp;
pub mod model;

pub use error::{Error, Result};
pub use geometry::{generate_realization, ChannelRealization, ScenarioConfig};
pub use model::{BeamMatrix, PhaseVector};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
