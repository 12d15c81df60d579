//! P2P grid cost allocation: DC power-flow matching, QUBO solvers,
//! settlement and benchmarking.
//!
//! The pipeline: [`instance`] generates a community on a rescaled test-case
//! topology, [`matching`] prices every producer-consumer pair and assembles
//! the matching QUBO, [`solvers`] minimizes it, [`settlement`] turns an
//! assignment into per-peer bills and community aggregates, and [`bench`]
//! implements the fixed-timeout and time-to-solution protocols plus the
//! parameter sweeps.

pub mod bench;
pub mod cases;
pub mod error;
pub mod grid;
pub mod instance;
pub mod matching;
pub mod settlement;
pub mod solvers;

pub use error::{Error, Result};
