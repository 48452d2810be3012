//! Simulation and certified mixing-rate bounds for discrete-time chains
//! whose next-symbol law depends on the entire past through a normalized
//! log-kernel.
//!
//! The crate has two halves that check each other:
//!
//! - A **simulation side**: kernel models ([`potential`]), seeded trajectory
//!   sampling ([`simulate`]), and a block coupling of two chains started
//!   from different pasts ([`coupling`]), with Monte Carlo estimators of the
//!   per-block disagreement probability, per-coordinate relaxation, and the
//!   meeting-time tail. Small finite-memory instances have exact
//!   brute-force ground truth in [`oracle`].
//! - A **bound side** ([`renewal`]): from a chi-square regularity profile,
//!   a fully computable dominating renewal sequence `u_n` that certifies
//!   `P[block n disagrees] <= u_n` for the block-maximal coupling, plus
//!   relaxation and mixing rate bounds derived from it. No asymptotic
//!   constants are involved; decay rates are read off by slope fitting.
//!
//! [`divergence`] provides the f-divergence toolbox (TV, KL, chi-square,
//! Pinsker and Bretagnolle-Huber bounds, exact maximal coupling) used by
//! both halves, and [`analysis`] adds correlation-decay, invariance
//! principle, and concentration experiments on top of the simulator.
//! [`experiment`] binds everything into config-driven runs: see the `gmix`
//! binary and the crate examples.

pub mod analysis;
pub mod coupling;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod history;
pub mod num;
pub mod oracle;
pub mod potential;
pub mod renewal;
pub mod rng;
pub mod simulate;

pub use error::{GmixError, Result};
pub use history::History;
pub use potential::{Alphabet, PotentialModel, RegularityProfile};
pub use rng::RngStream;
