//! Numerics for four concurrent downconversion processes arranged in a ring:
//! four pump modes (1..4) drive four low-frequency modes (5..8) pairwise,
//! `1 -> (5,6)`, `2 -> (6,7)`, `3 -> (7,8)`, `4 -> (8,5)`.
//!
//! Quadripartite entanglement of the low modes is tested with optimised
//! van Loock–Furusawa inequalities in three settings:
//!
//! * [`analytic`]: undepleted pumps, exact quadrature propagators.
//! * [`spectra`]: linearised fluctuations and output spectra.
//! * [`stochastic`]: full positive-P trajectories.

pub mod analytic;
pub mod config;
pub mod entanglement;
pub mod error;
pub mod meanfield;
pub mod model;
pub mod report;
pub mod spectra;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{threshold_pump, CouplingTopology, SystemParams, ValidatedParams};
